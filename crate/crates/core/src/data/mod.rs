//! Datasets: generators, file formats, normalizations and splits.

pub mod csvio;
pub mod digits;
pub mod grassy;
pub mod idx;
pub mod normalize;
pub mod planted;
pub mod split;
pub mod texture;

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use grassy::{gen_grassy, gen_grassy_parts, GrassyConfig, GrassyParts};
pub use normalize::{log1p_libsize_normalize, minmax_normalize};
pub use planted::{gen_planted, PlantedConfig, PlantedDataset};
pub use split::{split, split_indices, Split};
pub use texture::{TexturePool, TextureSource};

/// Target rows carry salient and background variation; background rows only
/// the latter. Labels are for evaluation only and never reach training.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub target: Matrix,
    pub background: Matrix,
    pub target_labels: Option<Vec<usize>>,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(target: Matrix, background: Matrix, target_labels: Option<Vec<usize>>) -> Result<Self> {
        if target.cols() != background.cols() {
            return Err(Error::Shape {
                op: "dataset",
                lhs: target.shape(),
                rhs: background.shape(),
            });
        }
        if let Some(l) = &target_labels {
            if l.len() != target.rows() {
                return Err(Error::Contract(format!(
                    "{} labels for {} target rows",
                    l.len(),
                    target.rows()
                )));
            }
        }
        Ok(Self {
            target,
            background,
            target_labels,
            feature_names: None,
        })
    }

    pub fn d(&self) -> usize {
        self.target.cols()
    }

    /// Writes `target.csv`, `background.csv` and, when labels exist,
    /// `labels.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let names = self
            .feature_names
            .clone()
            .unwrap_or_else(|| csvio::default_feature_names(self.d()));
        csvio::write_matrix(&dir.join("target.csv"), &names, &self.target)?;
        csvio::write_matrix(&dir.join("background.csv"), &names, &self.background)?;
        if let Some(labels) = &self.target_labels {
            csvio::write_labels(&dir.join("labels.csv"), labels)?;
        }
        Ok(())
    }

    /// Reads the layout written by [`Dataset::save`] from explicit paths.
    pub fn load(target: &Path, background: &Path, labels: Option<&Path>) -> Result<Self> {
        let t = csvio::read_csv(target, None)?;
        let b = csvio::read_csv(background, None)?;
        let labels = labels.map(csvio::read_labels).transpose()?;
        let mut ds = Dataset::new(t.matrix, b.matrix, labels)?;
        ds.feature_names = Some(t.header);
        Ok(ds)
    }
}
