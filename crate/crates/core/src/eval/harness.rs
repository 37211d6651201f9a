use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::selectors::{train, LambdaSetting, Mode, SelectorModel, TrainConfig};

use super::classifiers::{accuracy, Classifier};
use super::masks::{central_fraction, write_pgm_mask, CENTRAL_WINDOW};

pub const RESULTS_HEADER: &str = "method,k,seed,classifier,accuracy,central_fraction,seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub method: Mode,
    pub k: usize,
    pub seed: u64,
    pub classifier: Classifier,
    pub accuracy: f64,
    /// Image datasets only.
    pub central_fraction: Option<f64>,
    /// Training plus evaluation wall time. Shared by the cells of one
    /// training run when the run is reused across `k`.
    pub seconds: f64,
    pub features: FeatureSet,
}

#[derive(Clone, Debug)]
pub struct CellFailure {
    pub method: Mode,
    pub k: usize,
    pub seed: u64,
    pub error: String,
}

pub struct Harness<'a> {
    pub methods: Vec<Mode>,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub dataset: &'a Dataset,
    pub classifier: Classifier,
    /// Per-method training settings; `k` and `seed` are overwritten per cell.
    pub train: TrainConfig,
    pub method_overrides: BTreeMap<Mode, TrainConfig>,
    pub train_fraction: f64,
    /// Square image side when the features are pixels.
    pub image_side: Option<usize>,
    /// Directory for per-cell PGM selection masks (image datasets only).
    pub mask_dir: Option<PathBuf>,
    pub workers: usize,
}

impl<'a> Harness<'a> {
    pub fn new(dataset: &'a Dataset, methods: Vec<Mode>, ks: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            methods,
            ks,
            seeds,
            dataset,
            classifier: Classifier::Knn,
            train: TrainConfig::default(),
            method_overrides: BTreeMap::new(),
            train_fraction: 0.8,
            image_side: None,
            mask_dir: None,
            workers: 1,
        }
    }

    fn config_for(&self, mode: Mode) -> TrainConfig {
        self.method_overrides
            .get(&mode)
            .cloned()
            .unwrap_or_else(|| self.train.clone())
    }
}

pub struct BenchmarkReport {
    /// Sorted by method, k, seed.
    pub results: Vec<EvalResult>,
    pub failures: Vec<CellFailure>,
}

impl BenchmarkReport {
    /// Results CSV. The `seconds` column is left empty unless
    /// `with_timing`, so reruns produce identical bytes.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        for r in &self.results {
            let central = r.central_fraction.map(|c| c.to_string()).unwrap_or_default();
            let seconds = if with_timing {
                format!("{:.3}", r.seconds)
            } else {
                String::new()
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method, r.k, r.seed, r.classifier, r.accuracy, central, seconds
            )
            .expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: &Path, with_timing: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(with_timing)).map_err(|e| Error::io(path, e))
    }

    pub fn accuracies(&self, method: Mode, k: usize) -> Vec<f64> {
        self.results
            .iter()
            .filter(|r| r.method == method && r.k == k)
            .map(|r| r.accuracy)
            .collect()
    }
}

/// One training run and the `k` values it serves.
struct Job {
    method: Mode,
    seed: u64,
    ks: Vec<usize>,
}

/// Gate methods with a fixed λ train independently of `k`, so one run
/// serves every `k`; CAE and λ-searching runs are per `k`.
fn plan(h: &Harness) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &method in &h.methods {
        let cfg = h.config_for(method);
        let shared = method != Mode::Cae && matches!(cfg.lambda, LambdaSetting::Fixed(_));
        for &seed in &h.seeds {
            if shared {
                jobs.push(Job {
                    method,
                    seed,
                    ks: h.ks.clone(),
                });
            } else {
                jobs.extend(h.ks.iter().map(|&k| Job {
                    method,
                    seed,
                    ks: vec![k],
                }));
            }
        }
    }
    jobs
}

fn run_job(h: &Harness, job: &Job) -> Vec<std::result::Result<EvalResult, CellFailure>> {
    let fail = |k: usize, e: Error| CellFailure {
        method: job.method,
        k,
        seed: job.seed,
        error: e.to_string(),
    };
    let start = Instant::now();
    let d = h.dataset.d();
    // k = d keeps every feature, so no selector is trained for it
    let trained_k = job.ks.iter().copied().filter(|&k| k != d).max();
    let prepared = (|| -> Result<(crate::data::Split, Option<SelectorModel>)> {
        let s = split(h.dataset, h.train_fraction, job.seed)?;
        assert!(
            s.train_idx.iter().all(|i| s.test_idx.binary_search(i).is_err()),
            "train and test rows overlap"
        );
        if s.train.target_labels.is_none() {
            return Err(Error::Contract("benchmark datasets need target labels".into()));
        }
        let Some(k) = trained_k else { return Ok((s, None)) };
        let mut cfg = h.config_for(job.method);
        cfg.seed = job.seed;
        cfg.k = k;
        let outcome = train(job.method, &s.train.target, Some(&s.train.background), &cfg)?;
        Ok((s, Some(outcome.model)))
    })();
    let (s, model) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return job
                .ks
                .iter()
                .map(|&k| {
                    Err(CellFailure {
                        method: job.method,
                        k,
                        seed: job.seed,
                        error: msg.clone(),
                    })
                })
                .collect();
        }
    };
    let train_seconds = start.elapsed().as_secs_f64();
    job.ks
        .iter()
        .map(|&k| {
            let cell_start = Instant::now();
            let features = match &model {
                Some(m) if k != d => m.features(k).map_err(|e| fail(k, e))?,
                _ => FeatureSet::all(d),
            };
            let train_y = s.train.target_labels.as_ref().expect("checked");
            let test_y = s.test_labels.as_ref().expect("split keeps labels");
            let pred = h
                .classifier
                .predict(
                    &s.train.target.select_cols(&features.indices),
                    train_y,
                    &s.test_x.select_cols(&features.indices),
                )
                .map_err(|e| fail(k, e))?;
            let acc = accuracy(&pred, test_y).map_err(|e| fail(k, e))?;
            let central = match h.image_side {
                Some(side) if side >= CENTRAL_WINDOW => {
                    Some(central_fraction(&features, side, CENTRAL_WINDOW).map_err(|e| fail(k, e))?)
                }
                _ => None,
            };
            if let (Some(dir), Some(side)) = (&h.mask_dir, h.image_side) {
                let path = dir.join(format!("{}_k{}_seed{}.pgm", job.method, k, job.seed));
                write_pgm_mask(&path, &features, side, side).map_err(|e| fail(k, e))?;
            }
            Ok(EvalResult {
                method: job.method,
                k,
                seed: job.seed,
                classifier: h.classifier,
                accuracy: acc,
                central_fraction: central,
                seconds: train_seconds + cell_start.elapsed().as_secs_f64(),
                features,
            })
        })
        .collect()
}

/// Trains and evaluates every (method, k, seed) cell. Failed cells are
/// reported in `failures` rather than aborting the run. Independent training
/// runs are spread over `workers` threads; results are merged in
/// (method, k, seed) order.
pub fn run_benchmark(h: &Harness) -> Result<BenchmarkReport> {
    if h.methods.is_empty() || h.ks.is_empty() || h.seeds.is_empty() {
        return Err(Error::Config("benchmark needs at least one method, k and seed".into()));
    }
    if let Some(dir) = &h.mask_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let jobs = plan(h);
    let next = Mutex::new(0usize);
    let collected = Mutex::new(Vec::new());
    let workers = h.workers.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(job) = jobs.get(i) else { break };
                log::info!("training {} seed {} for k = {:?}", job.method, job.seed, job.ks);
                let out = run_job(h, job);
                collected.lock().expect("results").extend(out);
            });
        }
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for r in collected.into_inner().expect("results") {
        match r {
            Ok(v) => results.push(v),
            Err(f) => {
                log::error!("cell {} k={} seed={} failed: {}", f.method, f.k, f.seed, f.error);
                failures.push(f);
            }
        }
    }
    results.sort_by_key(|r| (r.method, r.k, r.seed));
    failures.sort_by_key(|f| (f.method, f.k, f.seed));
    Ok(BenchmarkReport { results, failures })
}
