use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::Dataset;

/// A seeded train/test partition of the target rows. The background set is
/// kept whole for training.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub train: Dataset,
    pub test_x: Matrix,
    pub test_labels: Option<Vec<usize>>,
}

/// Indices for a `fraction` train split of `n` rows. Both sides are nonempty
/// whenever `n >= 2`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let perm = Rng::new(seed).permutation(n);
    let mut n_train = (n as f64 * fraction).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<Split> {
    let (train_idx, test_idx) = split_indices(ds.target.rows(), fraction, seed)?;
    let pick = |idx: &[usize]| {
        ds.target_labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect::<Vec<_>>())
    };
    let mut train = Dataset::new(
        ds.target.select_rows(&train_idx),
        ds.background.clone(),
        pick(&train_idx),
    )?;
    train.feature_names = ds.feature_names.clone();
    Ok(Split {
        test_x: ds.target.select_rows(&test_idx),
        test_labels: pick(&test_idx),
        train,
        train_idx,
        test_idx,
    })
}
