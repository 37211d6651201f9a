use std::fmt;
use std::str::FromStr;

use crate::adam::AdamConfig;
use crate::error::{Error, Result};
use crate::gates::DEFAULT_SIGMA;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Pretrained,
    Joint,
    Stopgrad,
    Cae,
    StgSupervised,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Pretrained,
        Mode::Joint,
        Mode::Stopgrad,
        Mode::Cae,
        Mode::StgSupervised,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Pretrained => "pretrained",
            Mode::Joint => "joint",
            Mode::Stopgrad => "stopgrad",
            Mode::Cae => "cae",
            Mode::StgSupervised => "stg-supervised",
        }
    }

    /// Modes that read background data.
    pub fn needs_background(self) -> bool {
        !matches!(self, Mode::Cae)
    }

    /// The three CFS variants, which share the `f`/`g`/`h` architecture.
    pub fn is_cfs(self) -> bool {
        matches!(self, Mode::Pretrained | Mode::Joint | Mode::Stopgrad)
    }

    pub(crate) fn code(self) -> f64 {
        Mode::ALL.iter().position(|m| *m == self).expect("listed") as f64
    }

    pub(crate) fn from_code(code: f64) -> Option<Mode> {
        Mode::ALL.iter().copied().find(|m| m.code() == code)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.iter().copied().find(|m| m.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown mode {s:?} (expected one of pretrained, joint, stopgrad, cae, stg-supervised)"
            ))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaSetting {
    Fixed(f64),
    /// Search for a λ leaving about `k` gates open.
    Auto,
}

impl fmt::Display for LambdaSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaSetting::Fixed(v) => write!(f, "{v}"),
            LambdaSetting::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for LambdaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(LambdaSetting::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(LambdaSetting::Fixed(v)),
            _ => Err(Error::Config(format!(
                "lambda must be a nonnegative number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    /// Background representation width.
    pub l: usize,
    pub lambda: LambdaSetting,
    /// Initial bracket for automatic λ search.
    pub lambda_bounds: (f64, f64),
    /// Gate noise scale σ.
    pub sigma: f64,
    /// Gate/reconstructor stage epochs (also the stg-supervised epochs).
    pub epochs: usize,
    /// Background autoencoder epochs (pretrained mode).
    pub pretrain_epochs: usize,
    /// Concrete autoencoder annealing epochs.
    pub cae_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Hidden widths of the reconstructor `f` and the CAE decoder.
    pub f_hidden: Vec<usize>,
    /// Hidden widths of the encoder `g` and decoder `h`.
    pub ae_hidden: Vec<usize>,
    /// Hidden widths of the stg-supervised classifier.
    pub clf_hidden: Vec<usize>,
    pub start_temperature: f64,
    pub end_temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 20,
            l: 20,
            lambda: LambdaSetting::Fixed(0.1),
            lambda_bounds: (1e-3, 10.0),
            sigma: DEFAULT_SIGMA,
            epochs: 100,
            pretrain_epochs: 100,
            cae_epochs: 200,
            lr: 1e-3,
            batch_size: 128,
            seed: 0,
            f_hidden: vec![512, 512],
            ae_hidden: vec![128],
            clf_hidden: vec![512, 512],
            start_temperature: 10.0,
            end_temperature: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k >= d {
            return Err(Error::Config(format!("k must satisfy 0 < k < d = {d}, got {}", self.k)));
        }
        if self.l == 0 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        let (lo, hi) = self.lambda_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!(
                "lambda bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
            )));
        }
        if !(self.start_temperature >= self.end_temperature && self.end_temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperatures must satisfy start >= end > 0, got {} and {}",
                self.start_temperature, self.end_temperature
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    pub(crate) fn fixed_lambda(&self) -> f64 {
        match self.lambda {
            LambdaSetting::Fixed(v) => v,
            LambdaSetting::Auto => self.lambda_bounds.0,
        }
    }
}
