//! Tabular data with a known salient feature set.
//!
//! Every row is `W·z` with `z ~ N(0, I_l)` and `W` a fixed random `d × l` map
//! with `N(0, 1/l)` entries, so each column carries unit background variance.
//! Target rows additionally get `snr · s_j` added to the `j`-th salient column,
//! `s ~ N(0, I_k)`. Labels encode the signs of the first `min(k, 3)` salient
//! factors as bits.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub k_salient: usize,
    pub l_background: usize,
    pub snr: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            m: 2000,
            d: 100,
            k_salient: 10,
            l_background: 10,
            snr: 1.0,
            seed: 0,
        }
    }
}

pub struct PlantedDataset {
    pub dataset: Dataset,
    /// Sorted salient column indices.
    pub salient: Vec<usize>,
    /// The `l × d` mixing map (row-vector convention: `x = z·mixing`).
    pub mixing: Matrix,
    pub target_z: Matrix,
    pub background_z: Matrix,
}

pub fn gen_planted(cfg: &PlantedConfig) -> Result<PlantedDataset> {
    let PlantedConfig {
        n,
        m,
        d,
        k_salient: k,
        l_background: l,
        snr,
        seed,
    } = *cfg;
    if k + l > d {
        return Err(Error::Config(format!(
            "k_salient + l_background = {} exceeds d = {d}",
            k + l
        )));
    }
    if l == 0 {
        return Err(Error::Config("l_background must be positive".into()));
    }
    if !(snr >= 0.0 && snr.is_finite()) {
        return Err(Error::Config(format!("snr must be finite and >= 0, got {snr}")));
    }
    let mut rng = Rng::new(seed);
    let mut salient = rng.permutation(d)[..k].to_vec();
    salient.sort_unstable();
    let mixing = rng.normal_matrix(l, d, 1.0 / (l as f64).sqrt());

    let target_z = rng.normal_matrix(n, l, 1.0);
    let s = rng.normal_matrix(n, k, 1.0);
    let background_z = rng.normal_matrix(m, l, 1.0);

    let mut target = target_z.matmul(&mixing)?;
    for r in 0..n {
        for (j, &col) in salient.iter().enumerate() {
            let v = target.get(r, col) + snr * s.get(r, j);
            target.set(r, col, v);
        }
    }
    let background = background_z.matmul(&mixing)?;

    let bits = k.min(3);
    let labels = (0..n)
        .map(|r| (0..bits).filter(|&j| s.get(r, j) > 0.0).map(|j| 1usize << j).sum())
        .collect();

    Ok(PlantedDataset {
        dataset: Dataset::new(target, background, Some(labels))?,
        salient,
        mixing,
        target_z,
        background_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_snr_makes_target_background_like() {
        let cfg = PlantedConfig {
            n: 300,
            m: 300,
            d: 12,
            k_salient: 3,
            l_background: 4,
            snr: 0.0,
            seed: 1,
        };
        let p = gen_planted(&cfg).unwrap();
        // Every target row lies in the row space of the mixing map.
        let fit = p.target_z.matmul(&p.mixing).unwrap();
        assert!(fit.bit_eq(&p.dataset.target));
    }

    #[test]
    fn seeded_and_labelled() {
        let cfg = PlantedConfig {
            n: 50,
            m: 40,
            ..PlantedConfig::default()
        };
        let a = gen_planted(&cfg).unwrap();
        let b = gen_planted(&cfg).unwrap();
        assert!(a.dataset.target.bit_eq(&b.dataset.target));
        assert_eq!(a.salient, b.salient);
        assert_eq!(a.salient.len(), 10);
        assert_eq!(a.dataset.background.shape(), (40, 100));
        assert!(a.dataset.target_labels.unwrap().iter().all(|&c| c < 8));
    }

    #[test]
    fn dimension_conflicts() {
        let cfg = PlantedConfig {
            d: 5,
            k_salient: 3,
            l_background: 3,
            ..PlantedConfig::default()
        };
        assert!(gen_planted(&cfg).is_err());
    }
}
