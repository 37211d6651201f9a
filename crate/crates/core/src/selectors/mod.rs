//! Contrastive feature selection training and the two baselines.
//!
//! CFS fits a background autoencoder `h(g(x))` and a gated reconstructor
//! `f(g(x), x ⊙ G)` whose gates decide which target features to keep:
//!
//! * `pretrained`: `g`, `h` are trained on background data first and `g` is
//!   frozen while the gates and `f` are trained on target data.
//! * `joint`: every step sums the gated target loss and the background
//!   autoencoder loss over one target and one background batch; `g` receives
//!   gradient from both.
//! * `stopgrad`: as `joint`, but the target path through `g` is gradient
//!   blocked, so `g` learns only from background data.
//!
//! Baselines: an unsupervised concrete autoencoder (`cae`) and a gated
//! target-versus-background classifier (`stg-supervised`).

mod baselines;
mod cfs;
mod checkpoint;
mod config;
mod lambda;
pub mod objectives;

pub use baselines::{
    stg_supervised_predict, train_cae_baseline, train_stg_supervised_baseline, CaeOutcome, StgSupervisedOutcome,
    CAE_CONVERGENCE,
};
pub use cfs::{
    pretrain_background, select_top_k, train, train_selector, Selection, SelectorModel, StageLosses, TrainOutcome,
};
pub use checkpoint::{read_tensors, write_tensors, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{LambdaSetting, Mode, TrainConfig};
pub use lambda::{tune_lambda, LambdaSearch};

use crate::matrix::Matrix;
use crate::rng::Rng;

/// Shuffled mini-batch index lists covering `0..n` once.
pub(crate) fn batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let perm = rng.permutation(n);
    perm.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Endless reshuffled stream of background batches paired with target steps.
pub(crate) struct CyclicBatches {
    n: usize,
    batch_size: usize,
    order: Vec<usize>,
    pos: usize,
}

impl CyclicBatches {
    pub(crate) fn new(n: usize, batch_size: usize) -> Self {
        Self {
            n,
            batch_size: batch_size.max(1).min(n.max(1)),
            order: Vec::new(),
            pos: 0,
        }
    }

    pub(crate) fn next(&mut self, rng: &mut Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.batch_size);
        while out.len() < self.batch_size {
            if self.pos == self.order.len() {
                self.order = rng.permutation(self.n);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Weighted running mean of per-batch losses over one epoch.
#[derive(Default)]
pub(crate) struct EpochMean {
    total: f64,
    count: usize,
}

impl EpochMean {
    pub(crate) fn add(&mut self, loss: f64, rows: usize) {
        self.total += loss * rows as f64;
        self.count += rows;
    }

    pub(crate) fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total / self.count as f64
        }
    }
}

pub(crate) fn check_finite(loss: f64, step: u64) -> crate::Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(crate::Error::Training {
            step,
            what: format!("loss became {loss}"),
        })
    }
}

pub(crate) fn check_data(name: &str, m: &Matrix) -> crate::Result<()> {
    if m.rows() == 0 {
        return Err(crate::Error::Contract(format!("{name} data is empty")));
    }
    if !m.is_finite() {
        return Err(crate::Error::Contract(format!("{name} data has non-finite entries")));
    }
    Ok(())
}
