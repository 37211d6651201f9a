//! Digits superimposed on grass-like textures.
//!
//! Amplitude means `max − min` over an image. A target row is
//! `digit + a·texture` where the texture is rescaled to `[0, 1]` and `a` is
//! `scale` times the digit's amplitude, so the texture's amplitude is exactly
//! `scale ×` the digit's. A background row is the same construction without
//! the digit, with `a` taken from an independently drawn digit so both sets
//! see identically distributed textures. Pixels are clipped to
//! `[0, 1 + scale]`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::texture::{check_pool, TexturePool, TextureSource};
use super::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct GrassyConfig {
    pub side: usize,
    pub source: TextureSource,
    pub scale: f64,
    pub n_target: usize,
    pub n_background: usize,
    pub seed: u64,
}

impl Default for GrassyConfig {
    fn default() -> Self {
        Self {
            side: 28,
            source: TextureSource::Procedural,
            scale: 2.0,
            n_target: 2000,
            n_background: 2000,
            seed: 0,
        }
    }
}

impl GrassyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "scale must be finite and >= 0, got {}",
                self.scale
            )));
        }
        if self.side < 8 {
            return Err(Error::Config(format!("image side must be >= 8, got {}", self.side)));
        }
        Ok(())
    }
}

/// A generated dataset together with the scaled textures (before clipping)
/// that went into each row.
pub struct GrassyParts {
    pub dataset: Dataset,
    pub target_textures: Matrix,
    pub background_textures: Matrix,
}

fn amplitude(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

pub fn gen_grassy(digits: &Matrix, labels: &[usize], cfg: &GrassyConfig, rng: &mut Rng) -> Result<Dataset> {
    gen_grassy_parts(digits, labels, cfg, rng).map(|p| p.dataset)
}

/// Target rows use the first `cfg.n_target` digits in order.
pub fn gen_grassy_parts(digits: &Matrix, labels: &[usize], cfg: &GrassyConfig, rng: &mut Rng) -> Result<GrassyParts> {
    cfg.validate()?;
    let d = cfg.side * cfg.side;
    if digits.cols() != d {
        return Err(Error::Contract(format!(
            "digit images have {} pixels, expected {}×{}",
            digits.cols(),
            cfg.side,
            cfg.side
        )));
    }
    if labels.len() != digits.rows() {
        return Err(Error::Contract(format!(
            "{} labels for {} digits",
            labels.len(),
            digits.rows()
        )));
    }
    if digits.rows() < cfg.n_target || digits.rows() == 0 {
        return Err(Error::Contract(format!(
            "{} digit images supplied, {} target rows requested",
            digits.rows(),
            cfg.n_target
        )));
    }
    if digits.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Contract("digit pixels must lie in [0, 1]".into()));
    }
    let pool = TexturePool::open(&cfg.source)?;
    check_pool(&pool, cfg.side)?;
    let hi = 1.0 + cfg.scale;

    let mut target = Matrix::zeros(cfg.n_target, d);
    let mut target_tex = Matrix::zeros(cfg.n_target, d);
    for i in 0..cfg.n_target {
        let digit = digits.row(i);
        let a = cfg.scale * amplitude(digit);
        let tex = pool.draw(cfg.side, rng);
        for (j, t) in tex.iter().enumerate() {
            let scaled = a * t;
            target_tex.set(i, j, scaled);
            target.set(i, j, (digit[j] + scaled).clamp(0.0, hi));
        }
    }

    let mut background = Matrix::zeros(cfg.n_background, d);
    let mut background_tex = Matrix::zeros(cfg.n_background, d);
    for i in 0..cfg.n_background {
        let reference = digits.row(rng.below(digits.rows()));
        let a = cfg.scale * amplitude(reference);
        let tex = pool.draw(cfg.side, rng);
        for (j, t) in tex.iter().enumerate() {
            let scaled = a * t;
            background_tex.set(i, j, scaled);
            background.set(i, j, scaled.clamp(0.0, hi));
        }
    }

    let dataset = Dataset::new(target, background, Some(labels[..cfg.n_target].to_vec()))?;
    Ok(GrassyParts {
        dataset,
        target_textures: target_tex,
        background_textures: background_tex,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::digits::gen_digits;

    fn small(scale: f64, n: usize) -> (Matrix, Vec<usize>, GrassyConfig) {
        let (digits, labels) = gen_digits(n, 28, &mut Rng::new(11));
        let cfg = GrassyConfig {
            scale,
            n_target: n,
            n_background: n,
            ..GrassyConfig::default()
        };
        (digits, labels, cfg)
    }

    #[test]
    fn zero_scale_gives_raw_digits() {
        let (digits, labels, cfg) = small(0.0, 20);
        let ds = gen_grassy(&digits, &labels, &cfg, &mut Rng::new(1)).unwrap();
        assert!(ds.target.bit_eq(&digits));
        assert_eq!(ds.target_labels.as_deref(), Some(&labels[..]));
    }

    #[test]
    fn texture_amplitude_is_double_the_digit() {
        let (digits, labels, cfg) = small(2.0, 30);
        let parts = gen_grassy_parts(&digits, &labels, &cfg, &mut Rng::new(1)).unwrap();
        for r in 0..30 {
            let ratio = amplitude(parts.target_textures.row(r)) / amplitude(digits.row(r));
            assert!((ratio - 2.0).abs() < 1e-9, "row {r}: {ratio}");
        }
        assert!(parts.dataset.target.data().iter().all(|v| (0.0..=3.0).contains(v)));
        assert!(parts.dataset.background.data().iter().all(|v| (0.0..=3.0).contains(v)));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (digits, labels, mut cfg) = small(2.0, 5);
        cfg.scale = -1.0;
        assert!(gen_grassy(&digits, &labels, &cfg, &mut Rng::new(1)).is_err());
        cfg.scale = 2.0;
        cfg.n_target = 6;
        assert!(gen_grassy(&digits, &labels, &cfg, &mut Rng::new(1)).is_err());
        cfg.n_target = 5;
        cfg.source = TextureSource::Directory(tempfile::tempdir().unwrap().path().into());
        assert!(gen_grassy(&digits, &labels, &cfg, &mut Rng::new(1)).is_err());
    }
}
