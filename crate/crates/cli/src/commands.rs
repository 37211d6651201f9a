use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cfs_core::data::csvio::{self, encode_labels};
use cfs_core::data::digits::gen_digits;
use cfs_core::data::{gen_grassy, gen_planted, idx, log1p_libsize_normalize, minmax_normalize};
use cfs_core::data::{Dataset, GrassyConfig, PlantedConfig, TextureSource};
use cfs_core::eval::{run_benchmark, write_pgm_mask, Classifier, Harness};
use cfs_core::infotheory::{mse_mi_gaussian_check, random_instance, InstanceKind, TrialRecord};
use cfs_core::selectors::{train, LambdaSetting, Mode, SelectorModel, TrainConfig};
use cfs_core::{FeatureSet, Matrix, Rng};

use crate::args::*;
use crate::config::{write_manifest, UsageError, MANIFEST_NAME};

/// Acceptance failures: violated bounds or irreproducible output.
#[derive(Debug)]
pub struct Violation(pub String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Pretrained => Mode::Pretrained,
            ModeArg::Joint => Mode::Joint,
            ModeArg::Stopgrad => Mode::Stopgrad,
            ModeArg::Cae => Mode::Cae,
            ModeArg::StgSupervised => Mode::StgSupervised,
        }
    }
}

impl From<ClassifierArg> for Classifier {
    fn from(c: ClassifierArg) -> Self {
        match c {
            ClassifierArg::Knn => Classifier::Knn,
            ClassifierArg::Logistic => Classifier::Logistic,
        }
    }
}

pub fn gen(args: GenArgs, manifest: &str) -> Result<()> {
    match args.kind {
        Some(GenKind::Grassy(g)) => gen_grassy_cmd(g, manifest),
        Some(GenKind::Planted(p)) => gen_planted_cmd(p, manifest),
        None => Err(usage("gen needs `grassy`, `planted` or --from-manifest")),
    }
}

fn gen_grassy_cmd(a: GrassyCmd, manifest: &str) -> Result<()> {
    let cfg = GrassyConfig {
        side: a.side,
        source: a
            .textures
            .clone()
            .map_or(TextureSource::Procedural, TextureSource::Directory),
        scale: a.scale,
        n_target: a.n_target,
        n_background: a.n_background,
        seed: a.seed,
    };
    if !(a.scale >= 0.0 && a.scale.is_finite()) {
        return Err(usage(format!("--scale must be finite and >= 0, got {}", a.scale)));
    }
    if a.side < 8 {
        return Err(usage(format!("--side must be at least 8, got {}", a.side)));
    }
    let mut rng = Rng::new(a.seed);
    let (digits, labels) = match (&a.mnist_images, &a.mnist_labels) {
        (Some(images), Some(labels)) => {
            let imgs = idx::read_images(images)?;
            if imgs.height != a.side || imgs.width != a.side {
                bail!(
                    "{} holds {}×{} images but --side is {}",
                    images.display(),
                    imgs.height,
                    imgs.width,
                    a.side
                );
            }
            let labels = idx::read_labels(labels)?;
            if labels.len() != imgs.images.rows() {
                bail!("{} images but {} labels", imgs.images.rows(), labels.len());
            }
            (imgs.images, labels)
        }
        _ => gen_digits(a.n_target, a.side, &mut rng),
    };
    if digits.rows() < a.n_target {
        bail!("{} digit images available, --n-target is {}", digits.rows(), a.n_target);
    }
    let ds = gen_grassy(&digits, &labels, &cfg, &mut rng)?;
    ds.save(&a.out)?;
    write_manifest(&a.out.join(MANIFEST_NAME), manifest)?;
    log::info!(
        "wrote {} target and {} background rows to {}",
        a.n_target,
        a.n_background,
        a.out.display()
    );
    Ok(())
}

fn gen_planted_cmd(a: PlantedCmd, manifest: &str) -> Result<()> {
    let cfg = PlantedConfig {
        n: a.n,
        m: a.m,
        d: a.d,
        k_salient: a.k_salient,
        l_background: a.l_background,
        snr: a.snr,
        seed: a.seed,
    };
    let p = gen_planted(&cfg).map_err(|e| usage(e.to_string()))?;
    p.dataset.save(&a.out)?;
    let salient = FeatureSet::new(p.salient.clone(), a.d, Vec::new())?;
    salient.save(&a.out.join("salient.json"))?;
    write_manifest(&a.out.join(MANIFEST_NAME), manifest)?;
    log::info!("wrote planted dataset to {}", a.out.display());
    Ok(())
}

/// Loads the target/background pair named by `a`. The background may be
/// absent only when `need_background` is false.
pub fn load_dataset(a: &DataArgs, need_background: bool) -> Result<Dataset> {
    let from_dir = |name: &str| a.data.as_ref().map(|d| d.join(name));
    let target = a
        .target
        .clone()
        .or_else(|| from_dir("target.csv"))
        .ok_or_else(|| usage("give --data DIR or --target FILE"))?;
    let background = a.background.clone().or_else(|| from_dir("background.csv"));
    let labels: Option<PathBuf> = a
        .labels
        .clone()
        .or_else(|| from_dir("labels.csv").filter(|p| p.exists()));

    let t = csvio::read_csv(&target, a.label_column.as_deref())?;
    let d = t.matrix.cols();
    let bg = match &background {
        Some(p) if p.exists() || need_background => {
            let has_label = a.label_column.as_deref().filter(|c| header_has(p, c).unwrap_or(false));
            let b = csvio::read_csv(p, has_label)?;
            if b.header != t.header {
                bail!(
                    "{} and {} have different feature columns",
                    target.display(),
                    p.display()
                );
            }
            b.matrix
        }
        None if need_background => return Err(usage("this mode needs --background or --data")),
        _ => Matrix::zeros(0, d),
    };
    let target_labels = match (t.labels, labels) {
        (Some(raw), _) => Some(encode_labels(&raw).0),
        (None, Some(p)) => Some(csvio::read_labels(&p)?),
        (None, None) => None,
    };
    let (target_m, bg_m) = normalize(t.matrix, bg, a.normalize)?;
    let mut ds = Dataset::new(target_m, bg_m, target_labels)?;
    ds.feature_names = Some(t.header);
    Ok(ds)
}

fn header_has(path: &Path, column: &str) -> Result<bool> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .next()
        .is_some_and(|h| h.split(',').any(|c| c.trim() == column)))
}

fn normalize(target: Matrix, background: Matrix, how: Normalize) -> Result<(Matrix, Matrix)> {
    match how {
        Normalize::None => Ok((target, background)),
        Normalize::Minmax => {
            let n = target.rows();
            let all = minmax_normalize(&target.vstack(&background)?);
            let rows: Vec<usize> = (0..all.rows()).collect();
            Ok((all.select_rows(&rows[..n]), all.select_rows(&rows[n..])))
        }
        Normalize::Log1p => Ok((log1p_libsize_normalize(&target)?, log1p_libsize_normalize(&background)?)),
    }
}

fn parse_lambda(s: &str) -> Result<LambdaSetting> {
    s.parse::<LambdaSetting>()
        .map_err(|_| usage(format!("--lambda must be a positive number or \"auto\", got {s:?}")))
}

/// Builds the training config, naming the offending flag on bad values.
pub fn train_config(a: &TrainArgs, seed: u64, d: usize) -> Result<TrainConfig> {
    if a.k == 0 || a.k >= d {
        return Err(usage(format!(
            "--k must satisfy 0 < k < {d} (the feature count), got {}",
            a.k
        )));
    }
    if a.bg_dim == 0 {
        return Err(usage("--bg-dim must be at least 1"));
    }
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(usage(format!("--lr must be positive, got {}", a.lr)));
    }
    if !(a.sigma > 0.0 && a.sigma.is_finite()) {
        return Err(usage(format!("--sigma must be positive, got {}", a.sigma)));
    }
    if !(a.lambda_lo > 0.0 && a.lambda_hi > a.lambda_lo && a.lambda_hi.is_finite()) {
        return Err(usage(format!(
            "--lambda-lo and --lambda-hi must satisfy 0 < lo < hi, got {} and {}",
            a.lambda_lo, a.lambda_hi
        )));
    }
    if !(a.start_temp >= a.end_temp && a.end_temp > 0.0) {
        return Err(usage(format!(
            "--start-temp and --end-temp must satisfy start >= end > 0, got {} and {}",
            a.start_temp, a.end_temp
        )));
    }
    for (flag, widths) in [
        ("--hidden", &a.hidden),
        ("--ae-hidden", &a.ae_hidden),
        ("--clf-hidden", &a.clf_hidden),
    ] {
        if widths.contains(&0) {
            return Err(usage(format!("{flag} widths must be positive")));
        }
    }
    let cfg = TrainConfig {
        k: a.k,
        l: a.bg_dim,
        lambda: parse_lambda(&a.lambda)?,
        lambda_bounds: (a.lambda_lo, a.lambda_hi),
        sigma: a.sigma,
        epochs: a.epochs,
        pretrain_epochs: a.pretrain_epochs,
        cae_epochs: a.cae_epochs,
        lr: a.lr,
        batch_size: a.batch_size,
        seed,
        f_hidden: a.hidden.clone(),
        ae_hidden: a.ae_hidden.clone(),
        clf_hidden: a.clf_hidden.clone(),
        start_temperature: a.start_temp,
        end_temperature: a.end_temp,
    };
    cfg.validate(d).map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn losses_csv(history: &[cfs_core::selectors::StageLosses]) -> String {
    let mut out = String::from("stage,epoch,loss\n");
    for stage in history {
        for (e, l) in stage.losses.iter().enumerate() {
            writeln!(out, "{},{},{}", stage.stage, e, l).expect("string write");
        }
    }
    out
}

pub fn train_cmd(a: TrainCmd, manifest: &str) -> Result<()> {
    let mode = Mode::from(a.mode);
    let ds = load_dataset(&a.data, mode.needs_background())?;
    let cfg = train_config(&a.train, a.seed, ds.d())?;
    let background = (ds.background.rows() > 0).then_some(&ds.background);
    let outcome = train(mode, &ds.target, background, &cfg)?;
    if a.check_determinism {
        let again = train(mode, &ds.target, background, &cfg)?;
        if again.features.to_json()? != outcome.features.to_json()? {
            return Err(Violation("two training runs with identical flags selected different features".into()).into());
        }
        log::info!("determinism check passed");
    }
    create_dir(&a.out)?;
    outcome.model.save(&a.out.join("model.cfs"))?;
    outcome.features.save(&a.out.join("features.json"))?;
    std::fs::write(a.out.join("losses.csv"), losses_csv(&outcome.history))?;
    if let Some(search) = &outcome.search {
        let mut text = String::from("lambda,open_gates\n");
        for (lambda, open) in &search.probes {
            writeln!(text, "{lambda},{open}").expect("string write");
        }
        std::fs::write(a.out.join("lambda_search.csv"), text)?;
        if !search.within_tolerance {
            log::warn!(
                "λ search left {} gates open for k = {}; kept the closest λ = {} and the top {} gates",
                search.open,
                cfg.k,
                search.lambda,
                cfg.k
            );
        }
    }
    write_manifest(&a.out.join(MANIFEST_NAME), manifest)?;
    log::info!("λ = {}; selected {:?}", outcome.lambda, outcome.features.indices);
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest");
    path.with_file_name(name)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub fn select_cmd(a: SelectCmd, manifest: &str) -> Result<()> {
    let model = SelectorModel::load(&a.checkpoint)?;
    if a.k == 0 || a.k > model.d {
        return Err(usage(format!("--k must satisfy 0 < k <= {}, got {}", model.d, a.k)));
    }
    let features = model.features(a.k)?;
    create_parent(&a.out)?;
    features.save(&a.out)?;
    write_manifest(&sidecar(&a.out), manifest)?;
    Ok(())
}

pub fn mask_cmd(a: MaskCmd, manifest: &str) -> Result<()> {
    let features = FeatureSet::load(&a.features)?;
    create_parent(&a.out)?;
    write_pgm_mask(&a.out, &features, a.width, a.height)?;
    write_manifest(&sidecar(&a.out), manifest)?;
    Ok(())
}

pub fn eval_cmd(a: EvalCmd, manifest: &str) -> Result<()> {
    let methods: Vec<Mode> = a.methods.iter().map(|&m| m.into()).collect();
    let need_bg = methods.iter().any(|m| m.needs_background());
    let ds = load_dataset(&a.data, need_bg)?;
    if ds.target_labels.is_none() {
        return Err(usage(
            "eval needs target labels (labels.csv, --labels or --label-column)",
        ));
    }
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return Err(usage(format!(
            "--train-fraction must lie in (0, 1), got {}",
            a.train_fraction
        )));
    }
    if a.image_side > 0 && a.image_side * a.image_side != ds.d() {
        return Err(usage(format!(
            "--image-side {} does not match {} features",
            a.image_side,
            ds.d()
        )));
    }
    for &k in &a.ks {
        if k == 0 || k > ds.d() {
            return Err(usage(format!("--ks values must satisfy 0 < k <= {}, got {k}", ds.d())));
        }
    }
    let max_k = a.ks.iter().copied().max().ok_or_else(|| usage("--ks is empty"))?;
    let mut train_args = a.train.clone();
    train_args.k = max_k;
    let cfg = train_config(&train_args, 0, ds.d())?;

    let mut h = Harness::new(&ds, methods, a.ks.clone(), a.seeds.clone());
    h.classifier = a.classifier.into();
    h.train = cfg;
    h.train_fraction = a.train_fraction;
    h.workers = a.workers.max(1);
    if a.image_side > 0 {
        h.image_side = Some(a.image_side);
        h.mask_dir = Some(a.out.join("masks"));
    }
    create_dir(&a.out)?;
    let report = run_benchmark(&h)?;
    let csv = report.to_csv(a.timing);
    if a.check_determinism {
        let again = run_benchmark(&h)?;
        if again.to_csv(false) != report.to_csv(false) {
            return Err(Violation("two benchmark runs with identical flags produced different results".into()).into());
        }
        log::info!("determinism check passed");
    }
    std::fs::write(a.out.join("results.csv"), &csv)?;
    let feats_dir = a.out.join("features");
    create_dir(&feats_dir)?;
    for r in &report.results {
        r.features
            .save(&feats_dir.join(format!("{}_k{}_seed{}.json", r.method, r.k, r.seed)))?;
    }
    write_manifest(&a.out.join(MANIFEST_NAME), manifest)?;
    if !report.failures.is_empty() {
        let lines: Vec<String> = report
            .failures
            .iter()
            .map(|f| format!("{} k={} seed={}: {}", f.method, f.k, f.seed, f.error))
            .collect();
        return Err(anyhow!(
            "{} benchmark cell(s) failed:\n{}",
            lines.len(),
            lines.join("\n")
        ));
    }
    Ok(())
}

pub fn theory_cmd(a: TheoryCmd, manifest: &str) -> Result<()> {
    if a.max_latent == 0 || a.max_x == 0 {
        return Err(usage("--max-latent and --max-x must be at least 1"));
    }
    create_dir(&a.out)?;
    let mut rng = Rng::new(a.seed);
    let mut csv = String::new();
    let mut violations = Vec::new();
    for trial in 0..a.trials {
        let kind = match a.kind {
            InstanceArg::Dirichlet => InstanceKind::Dirichlet,
            InstanceArg::NearAssumption => InstanceKind::NearAssumption,
            InstanceArg::Mixed if trial % 2 == 0 => InstanceKind::Dirichlet,
            InstanceArg::Mixed => InstanceKind::NearAssumption,
        };
        let inst = random_instance(&mut rng, kind, a.max_latent, a.max_x)?;
        let rec = TrialRecord::evaluate(trial, a.seed, kind.name(), &inst.joint, &inst.reps)?;
        if trial == 0 {
            csv.push_str(&rec.csv_header());
            csv.push('\n');
        }
        csv.push_str(&rec.csv_row());
        csv.push('\n');
        for v in rec.violations() {
            violations.push(format!("trial {trial}: {} slack {:e}", v.name, v.slack));
        }
    }
    std::fs::write(a.out.join("bounds.csv"), csv)?;

    if a.gaussian_pairs > 0 {
        let mut g = String::from("var_signal,var_noise,lhs_nats,mi_nats,holds\n");
        let log_lo = 1e-2f64.ln();
        let log_hi = 1e2f64.ln();
        for _ in 0..a.gaussian_pairs {
            let va = rng.uniform_range(log_lo, log_hi).exp();
            let vn = rng.uniform_range(log_lo, log_hi).exp();
            let c = mse_mi_gaussian_check(va, vn)?;
            if !c.holds {
                violations.push(format!("gaussian va={va} vn={vn}: {} > {}", c.lhs_nats, c.mi_nats));
            }
            writeln!(g, "{va},{vn},{},{},{}", c.lhs_nats, c.mi_nats, c.holds).expect("string write");
        }
        std::fs::write(a.out.join("gaussian.csv"), g)?;
    }
    write_manifest(&a.out.join(MANIFEST_NAME), manifest)?;
    log::info!("{} trials, {} violations", a.trials, violations.len());
    if !violations.is_empty() {
        return Err(Violation(format!(
            "{} bound violation(s):\n{}",
            violations.len(),
            violations.join("\n")
        ))
        .into());
    }
    Ok(())
}
