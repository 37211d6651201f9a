//! Selected feature subsets and their JSON form
//! `{"k": int, "indices": [int...], "mu": [float...]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing feature indices, plus the per-feature scores the
/// selection was made from (gate means for gate methods; may be empty).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub k: usize,
    pub indices: Vec<usize>,
    pub mu: Vec<f64>,
}

impl FeatureSet {
    /// Sorts and validates `indices` against the feature count `d`.
    pub fn new(mut indices: Vec<usize>, d: usize, mu: Vec<f64>) -> Result<Self> {
        indices.sort_unstable();
        let fs = Self {
            k: indices.len(),
            indices,
            mu,
        };
        fs.validate(Some(d))?;
        Ok(fs)
    }

    pub fn all(d: usize) -> Self {
        Self {
            k: d,
            indices: (0..d).collect(),
            mu: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn validate(&self, d: Option<usize>) -> Result<()> {
        if self.k != self.indices.len() {
            return Err(Error::Contract(format!(
                "feature set declares k = {} but lists {} indices",
                self.k,
                self.indices.len()
            )));
        }
        if let Some(w) = self.indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Contract(format!(
                "feature indices must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        if let (Some(d), Some(&last)) = (d, self.indices.last()) {
            if last >= d {
                return Err(Error::Contract(format!(
                    "feature index {last} out of range for {d} features"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fs: FeatureSet = serde_json::from_str(s)?;
        fs.validate(None)?;
        Ok(fs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
