use std::path::Path;

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::gates::{AnnealSchedule, ConcreteSelector, GateVector};
use crate::matrix::Matrix;
use crate::nn::Mlp;
use crate::rng::Rng;
use crate::tape::Tape;

use super::baselines::{train_cae_baseline, train_stg_supervised_baseline};
use super::checkpoint::{read_tensors, write_tensors};
use super::config::{LambdaSetting, Mode, TrainConfig};
use super::lambda::{tune_lambda, LambdaSearch};
use super::objectives::{background_objective, contrastive_objective};
use super::{batches, check_data, check_finite, CyclicBatches, EpochMean};

#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    Gates(GateVector),
    Concrete(ConcreteSelector),
}

/// Networks and selection layer for one training mode.
///
/// CFS modes: `f` maps `[b, x ⊙ G]` (width `l + d`) to `d`, `g` maps `d` to
/// `l`, `h` maps `l` to `d`. CAE: `f` decodes the `k` selected values to `d`.
/// stg-supervised: `f` maps the gated `d` features to one logit.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectorModel {
    pub mode: Mode,
    pub d: usize,
    pub l: usize,
    pub f: Mlp,
    pub g: Option<Mlp>,
    pub h: Option<Mlp>,
    pub selection: Selection,
    /// Set once `g`/`h` have been fitted to background data.
    pub background_trained: bool,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

impl SelectorModel {
    pub fn new(mode: Mode, d: usize, cfg: &TrainConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate(d)?;
        let lambda = cfg.fixed_lambda();
        let model = match mode {
            Mode::Pretrained | Mode::Joint | Mode::Stopgrad => {
                let f = Mlp::new(&widths(cfg.l + d, &cfg.f_hidden, d), rng);
                let g = Mlp::new(&widths(d, &cfg.ae_hidden, cfg.l), rng);
                let rev: Vec<usize> = cfg.ae_hidden.iter().rev().copied().collect();
                let h = Mlp::new(&widths(cfg.l, &rev, d), rng);
                SelectorModel {
                    mode,
                    d,
                    l: cfg.l,
                    f,
                    g: Some(g),
                    h: Some(h),
                    selection: Selection::Gates(GateVector::init(d, cfg.sigma, lambda)?),
                    background_trained: false,
                }
            }
            Mode::Cae => {
                let f = Mlp::new(&widths(cfg.k, &cfg.f_hidden, d), rng);
                let schedule = AnnealSchedule::new(cfg.start_temperature, cfg.end_temperature, cfg.cae_epochs)?;
                let sel = ConcreteSelector::init(cfg.k, d, schedule, rng)?;
                SelectorModel {
                    mode,
                    d,
                    l: 0,
                    f,
                    g: None,
                    h: None,
                    selection: Selection::Concrete(sel),
                    background_trained: false,
                }
            }
            Mode::StgSupervised => {
                let f = Mlp::new(&widths(d, &cfg.clf_hidden, 1), rng);
                SelectorModel {
                    mode,
                    d,
                    l: 0,
                    f,
                    g: None,
                    h: None,
                    selection: Selection::Gates(GateVector::init(d, cfg.sigma, lambda)?),
                    background_trained: false,
                }
            }
        };
        Ok(model)
    }

    pub fn gates(&self) -> Option<&GateVector> {
        match &self.selection {
            Selection::Gates(g) => Some(g),
            Selection::Concrete(_) => None,
        }
    }

    pub fn concrete(&self) -> Option<&ConcreteSelector> {
        match &self.selection {
            Selection::Concrete(c) => Some(c),
            Selection::Gates(_) => None,
        }
    }

    /// Gate models: the `k` largest means. CAE: the distinct argmax features
    /// of the selector rows (at most `k`).
    pub fn features(&self, k: usize) -> Result<FeatureSet> {
        match &self.selection {
            Selection::Gates(g) => select_top_k(g, k),
            Selection::Concrete(c) => Ok(c.harden()?.features),
        }
    }

    /// Background representation `g(x)`.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.g
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("{} models have no encoder", self.mode)))?
            .infer(x)
    }

    /// Background autoencoder output `h(g(x))`.
    pub fn autoencode(&self, x: &Matrix) -> Result<Matrix> {
        let h = self
            .h
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("{} models have no decoder", self.mode)))?;
        h.infer(&self.encode(x)?)
    }

    /// Noise-free reconstruction `f([g(x), x ⊙ clamp(μ, 0, 1)])`.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        let gates = self
            .gates()
            .filter(|_| self.mode.is_cfs())
            .ok_or_else(|| Error::Contract(format!("{} models do not reconstruct through gates", self.mode)))?;
        let b = self.encode(x)?;
        let mask = gates.deterministic();
        let mut masked = x.clone();
        for r in 0..masked.rows() {
            for (v, m) in masked.row_mut(r).iter_mut().zip(&mask) {
                *v *= m;
            }
        }
        self.f.infer(&b.hcat(&masked)?)
    }

    pub fn to_tensors(&self) -> Vec<(String, Matrix)> {
        let mut out = vec![(
            "meta".to_string(),
            Matrix::row_vector(&[
                self.mode.code(),
                self.d as f64,
                self.l as f64,
                f64::from(u8::from(self.background_trained)),
            ]),
        )];
        let mut push = |prefix: &str, m: &Mlp| {
            out.extend(m.named_params(prefix).into_iter().map(|(n, t)| (n, t.clone())));
        };
        push("f", &self.f);
        if let Some(g) = &self.g {
            push("g", g);
        }
        if let Some(h) = &self.h {
            push("h", h);
        }
        match &self.selection {
            Selection::Gates(g) => {
                out.push(("gate.mu".into(), g.mu_row()));
                out.push(("gate.params".into(), Matrix::row_vector(&[g.sigma(), g.lambda()])));
            }
            Selection::Concrete(c) => {
                out.push(("concrete.log_alpha".into(), c.log_alpha.clone()));
                out.push((
                    "concrete.schedule".into(),
                    Matrix::row_vector(&[c.schedule.t0, c.schedule.tb, c.schedule.epochs as f64, c.temperature]),
                ));
            }
        }
        out
    }

    pub fn from_tensors(tensors: &[(String, Matrix)]) -> Result<Self> {
        let find = |name: &str| tensors.iter().find(|(n, _)| n == name).map(|(_, m)| m);
        let need = |name: &str| find(name).ok_or_else(|| Error::Contract(format!("checkpoint lacks tensor {name:?}")));
        let meta = need("meta")?;
        if meta.shape() != (1, 4) {
            return Err(Error::Contract("checkpoint meta tensor must be 1×4".into()));
        }
        let mode = Mode::from_code(meta.get(0, 0))
            .ok_or_else(|| Error::Contract(format!("unknown mode code {}", meta.get(0, 0))))?;
        let f = Mlp::from_named("f", |n| find(n))?;
        let g = find("g.0.weight")
            .map(|_| Mlp::from_named("g", |n| find(n)))
            .transpose()?;
        let h = find("h.0.weight")
            .map(|_| Mlp::from_named("h", |n| find(n)))
            .transpose()?;
        let selection = if let Some(mu) = find("gate.mu") {
            let p = need("gate.params")?;
            Selection::Gates(GateVector::new(mu.data().to_vec(), p.get(0, 0), p.get(0, 1))?)
        } else {
            let la = need("concrete.log_alpha")?;
            let s = need("concrete.schedule")?;
            let schedule = AnnealSchedule::new(s.get(0, 0), s.get(0, 1), s.get(0, 2) as usize)?;
            Selection::Concrete(ConcreteSelector {
                log_alpha: la.clone(),
                temperature: s.get(0, 3),
                schedule,
            })
        };
        Ok(SelectorModel {
            mode,
            d: meta.get(0, 1) as usize,
            l: meta.get(0, 2) as usize,
            f,
            g,
            h,
            selection,
            background_trained: meta.get(0, 3) != 0.0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_tensors(path, &self.to_tensors())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tensors(&read_tensors(path)?)
    }
}

/// Indices of the `k` largest gate means, ties toward the lower index.
pub fn select_top_k(gates: &GateVector, k: usize) -> Result<FeatureSet> {
    gates.top_k(k)
}

/// Fits `g` and `h` to background data. Returns the per-epoch mean loss.
pub fn pretrain_background(
    model: &mut SelectorModel,
    background: &Matrix,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    check_data("background", background)?;
    let (Some(g), Some(h)) = (model.g.as_mut(), model.h.as_mut()) else {
        return Err(Error::Contract(format!(
            "{} models have no background autoencoder",
            model.mode
        )));
    };
    if background.cols() != model.d {
        return Err(Error::Shape {
            op: "pretrain_background",
            lhs: (background.rows(), model.d),
            rhs: background.shape(),
        });
    }
    let mut adam = AdamState::new(cfg.adam(), g.params().into_iter().chain(h.params()));
    let mut history = Vec::with_capacity(cfg.pretrain_epochs);
    for _ in 0..cfg.pretrain_epochs {
        let mut epoch = EpochMean::default();
        for idx in batches(background.rows(), cfg.batch_size, rng) {
            let mut tape = Tape::new();
            let x = tape.constant(background.select_rows(&idx));
            let vars = background_objective(&mut tape, g, h, x, true)?;
            let loss = tape.value(vars.loss).item()?;
            check_finite(loss, adam.steps_taken() + 1)?;
            let grads = tape.backward(vars.loss)?;
            let gs: Vec<Matrix> = vars.g.iter().chain(&vars.h).map(|&v| grads.wrt(v)).collect();
            let mut params: Vec<&mut Matrix> = g.params_mut();
            params.extend(h.params_mut());
            adam.step(&mut params, &gs)?;
            epoch.add(loss, idx.len());
        }
        history.push(epoch.mean());
    }
    model.background_trained = true;
    Ok(history)
}

/// Trains the gates and reconstructor on target data (and, for joint and
/// stopgrad, the background autoencoder alongside). Returns the per-epoch mean
/// loss.
pub fn train_selector(
    model: &mut SelectorModel,
    target: &Matrix,
    background: Option<&Matrix>,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    check_data("target", target)?;
    if target.cols() != model.d {
        return Err(Error::Shape {
            op: "train_selector",
            lhs: (target.rows(), model.d),
            rhs: target.shape(),
        });
    }
    match model.mode {
        Mode::Pretrained => {
            if !model.background_trained {
                return Err(Error::Contract(
                    "pretrained mode needs pretrain_background first".into(),
                ));
            }
            train_frozen(model, target, cfg, rng)
        }
        Mode::Joint | Mode::Stopgrad => {
            let bg = background.ok_or_else(|| Error::Contract(format!("{} mode needs background data", model.mode)))?;
            check_data("background", bg)?;
            if bg.cols() != model.d {
                return Err(Error::Shape {
                    op: "train_selector",
                    lhs: (bg.rows(), model.d),
                    rhs: bg.shape(),
                });
            }
            train_paired(model, target, bg, cfg, rng)
        }
        Mode::Cae | Mode::StgSupervised => Err(Error::Contract(format!(
            "train_selector handles the CFS modes; use the {} baseline trainer",
            model.mode
        ))),
    }
}

fn take_gates(model: &SelectorModel) -> Result<GateVector> {
    model
        .gates()
        .cloned()
        .ok_or_else(|| Error::Contract("model has no gate layer".into()))
}

fn train_frozen(model: &mut SelectorModel, target: &Matrix, cfg: &TrainConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    let codes = model.encode(target)?;
    let mut gates = take_gates(model)?;
    let mut mu = gates.mu_row();
    let mut adam = AdamState::new(cfg.adam(), model.f.params().into_iter().chain([&mu]));
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut epoch = EpochMean::default();
        for idx in batches(target.rows(), cfg.batch_size, rng) {
            let noise = gates.noise(idx.len(), rng);
            let mut tape = Tape::new();
            let x = tape.constant(target.select_rows(&idx));
            let b = tape.constant(codes.select_rows(&idx));
            let mu_v = tape.leaf(mu.clone());
            let nz = tape.constant(noise);
            let vars = contrastive_objective(&mut tape, &model.f, &gates, b, x, mu_v, nz)?;
            let loss = tape.value(vars.loss).item()?;
            check_finite(loss, adam.steps_taken() + 1)?;
            let grads = tape.backward(vars.loss)?;
            let mut gs: Vec<Matrix> = vars.f.iter().map(|&v| grads.wrt(v)).collect();
            gs.push(grads.wrt(mu_v));
            let mut params = model.f.params_mut();
            params.push(&mut mu);
            adam.step(&mut params, &gs)?;
            epoch.add(loss, idx.len());
        }
        history.push(epoch.mean());
    }
    gates.set_mu(&mu)?;
    model.selection = Selection::Gates(gates);
    Ok(history)
}

fn train_paired(
    model: &mut SelectorModel,
    target: &Matrix,
    background: &Matrix,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let stop = model.mode == Mode::Stopgrad;
    let mut gates = take_gates(model)?;
    let mut mu = gates.mu_row();
    let SelectorModel { f, g, h, .. } = model;
    let (g, h) = (g.as_mut().expect("cfs model"), h.as_mut().expect("cfs model"));
    let mut adam = AdamState::new(
        cfg.adam(),
        f.params().into_iter().chain([&mu]).chain(g.params()).chain(h.params()),
    );
    let mut bg_batches = CyclicBatches::new(background.rows(), cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut epoch = EpochMean::default();
        for idx in batches(target.rows(), cfg.batch_size, rng) {
            let bidx = bg_batches.next(rng);
            let noise = gates.noise(idx.len(), rng);
            let mut tape = Tape::new();
            let xt = tape.constant(target.select_rows(&idx));
            let xb = tape.constant(background.select_rows(&bidx));
            let mu_v = tape.leaf(mu.clone());
            let nz = tape.constant(noise);
            let (code, g_target) = g.forward(&mut tape, xt, true)?;
            let b = if stop { tape.stop_gradient(code)? } else { code };
            let gated = contrastive_objective(&mut tape, f, &gates, b, xt, mu_v, nz)?;
            let bg = background_objective(&mut tape, g, h, xb, true)?;
            let total = tape.add(gated.loss, bg.loss)?;
            let loss = tape.value(total).item()?;
            check_finite(loss, adam.steps_taken() + 1)?;
            let grads = tape.backward(total)?;
            let mut gs: Vec<Matrix> = gated.f.iter().map(|&v| grads.wrt(v)).collect();
            gs.push(grads.wrt(mu_v));
            for (&a, &b) in g_target.iter().zip(&bg.g) {
                gs.push(grads.wrt(a).add(&grads.wrt(b))?);
            }
            gs.extend(bg.h.iter().map(|&v| grads.wrt(v)));
            let mut params = f.params_mut();
            params.push(&mut mu);
            params.extend(g.params_mut());
            params.extend(h.params_mut());
            adam.step(&mut params, &gs)?;
            epoch.add(loss, idx.len());
        }
        history.push(epoch.mean());
    }
    gates.set_mu(&mu)?;
    model.selection = Selection::Gates(gates);
    model.background_trained = true;
    Ok(history)
}

/// Per-epoch losses of one training stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageLosses {
    pub stage: &'static str,
    pub losses: Vec<f64>,
}

pub struct TrainOutcome {
    pub model: SelectorModel,
    pub features: FeatureSet,
    pub history: Vec<StageLosses>,
    /// λ actually used.
    pub lambda: f64,
    pub search: Option<LambdaSearch>,
}

fn with_lambda(model: &mut SelectorModel, lambda: f64) -> Result<()> {
    if let Selection::Gates(g) = &model.selection {
        model.selection = Selection::Gates(GateVector::new(g.mu.clone(), g.sigma(), lambda)?);
    }
    Ok(())
}

/// Runs the full pipeline for `mode` from `Rng::new(cfg.seed)`: background
/// pretraining when needed, gate training (with a λ search when
/// `cfg.lambda` is `Auto`) and top-`k` extraction.
pub fn train(mode: Mode, target: &Matrix, background: Option<&Matrix>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let d = target.cols();
    cfg.validate(d)?;
    check_data("target", target)?;
    if mode.needs_background() && background.is_none() {
        return Err(Error::Contract(format!("{mode} mode needs background data")));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut base = SelectorModel::new(mode, d, cfg, &mut rng)?;
    let mut history = Vec::new();

    if mode == Mode::Cae {
        let out = train_cae_baseline(base, target, cfg, &mut rng)?;
        history.push(StageLosses {
            stage: "cae",
            losses: out.losses,
        });
        return Ok(TrainOutcome {
            features: out.model.features(cfg.k)?,
            model: out.model,
            history,
            lambda: 0.0,
            search: None,
        });
    }

    if mode == Mode::Pretrained {
        let bg = background.expect("checked above");
        history.push(StageLosses {
            stage: "background",
            losses: pretrain_background(&mut base, bg, cfg, &mut rng)?,
        });
    }

    let run = |lambda: f64, rng: &mut Rng| -> Result<(SelectorModel, Vec<f64>)> {
        let mut model = base.clone();
        with_lambda(&mut model, lambda)?;
        let losses = if mode == Mode::StgSupervised {
            let out = train_stg_supervised_baseline(model, target, background.expect("checked above"), cfg, rng)?;
            model = out.model;
            out.losses
        } else {
            train_selector(&mut model, target, background, cfg, rng)?
        };
        Ok((model, losses))
    };
    let stage = if mode == Mode::StgSupervised {
        "classifier"
    } else {
        "selector"
    };

    let (model, losses, lambda, search) = match cfg.lambda {
        LambdaSetting::Fixed(lambda) => {
            let (m, l) = run(lambda, &mut rng)?;
            (m, l, lambda, None)
        }
        LambdaSetting::Auto => {
            let mut probes: Vec<(f64, SelectorModel, Vec<f64>)> = Vec::new();
            let search = tune_lambda(
                |lambda| {
                    // every probe restarts from the same stream
                    let mut probe_rng = Rng::new(cfg.seed ^ 0x5eed_1a3b_da00_0000);
                    let (m, l) = run(lambda, &mut probe_rng)?;
                    let open = m.gates().expect("gate model").open_count();
                    probes.push((lambda, m, l));
                    Ok(open)
                },
                cfg.k,
                cfg.lambda_bounds,
            )?;
            let (lambda, m, l) = probes
                .into_iter()
                .find(|(lam, _, _)| *lam == search.lambda)
                .expect("search returns a probed lambda");
            (m, l, lambda, Some(search))
        }
    };
    history.push(StageLosses { stage, losses });
    Ok(TrainOutcome {
        features: model.features(cfg.k)?,
        model,
        history,
        lambda,
        search,
    })
}
