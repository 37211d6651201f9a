//! Grass-like background textures: seeded multi-octave value noise, or crops
//! of user-supplied photographs.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::GrayImage;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Lattice size and weight of each noise octave, for a 28-pixel image.
const OCTAVES: [(usize, f64); 3] = [(7, 1.0), (14, 0.8), (28, 0.6)];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TextureSource {
    Procedural,
    Directory(PathBuf),
}

/// A ready-to-sample texture source.
pub enum TexturePool {
    Procedural,
    Images(Vec<GrayImage>),
}

impl TexturePool {
    pub fn open(source: &TextureSource) -> Result<Self> {
        match source {
            TextureSource::Procedural => Ok(TexturePool::Procedural),
            TextureSource::Directory(dir) => Ok(TexturePool::Images(load_images(dir)?)),
        }
    }

    /// One flattened `side × side` texture rescaled to exactly `[0, 1]`
    /// (or all zeros if it is flat).
    pub fn draw(&self, side: usize, rng: &mut Rng) -> Vec<f64> {
        let raw = match self {
            TexturePool::Procedural => value_noise(side, rng),
            TexturePool::Images(images) => {
                let img = &images[rng.below(images.len())];
                random_crop(img, side, rng)
            }
        };
        unit_range(raw)
    }
}

fn unit_range(mut v: Vec<f64>) -> Vec<f64> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for x in &mut v {
        *x = if range > 0.0 { (*x - lo) / range } else { 0.0 };
    }
    v
}

/// Sum of bilinearly interpolated uniform lattices.
pub fn value_noise(side: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; side * side];
    for &(lattice28, weight) in &OCTAVES {
        let n = ((lattice28 * side) as f64 / 28.0).round().max(2.0) as usize;
        let grid: Vec<f64> = (0..n * n).map(|_| rng.uniform()).collect();
        let step = (n - 1) as f64 / (side.max(2) - 1) as f64;
        for r in 0..side {
            let gy = r as f64 * step;
            let y0 = (gy.floor() as usize).min(n - 2);
            let ty = gy - y0 as f64;
            for c in 0..side {
                let gx = c as f64 * step;
                let x0 = (gx.floor() as usize).min(n - 2);
                let tx = gx - x0 as f64;
                let at = |y: usize, x: usize| grid[y * n + x];
                let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
                let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
                out[r * side + c] += weight * (top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}

/// Square crop with side uniform in `[side, min(width, height)]` at a
/// uniform position, resized to `side × side`.
fn random_crop(img: &GrayImage, side: usize, rng: &mut Rng) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let max_side = w.min(h);
    let crop = side + rng.below(max_side - side + 1);
    let x = rng.below(w - crop + 1) as u32;
    let y = rng.below(h - crop + 1) as u32;
    let view = image::imageops::crop_imm(img, x, y, crop as u32, crop as u32).to_image();
    let resized = image::imageops::resize(&view, side as u32, side as u32, FilterType::Triangle);
    resized.pixels().map(|p| p.0[0] as f64 / 255.0).collect()
}

fn load_images(dir: &Path) -> Result<Vec<GrayImage>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    let mut images = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = image::open(p)?.into_luma8();
        images.push(img);
    }
    Ok(images)
}

/// Checks a pool can produce `side × side` crops.
pub fn check_pool(pool: &TexturePool, side: usize) -> Result<()> {
    if let TexturePool::Images(images) = pool {
        if images.is_empty() {
            return Err(Error::Config("texture directory holds no png/jpeg images".into()));
        }
        if let Some(small) = images.iter().find(|i| (i.width().min(i.height()) as usize) < side) {
            return Err(Error::Config(format!(
                "texture image {}×{} is smaller than {side}×{side}",
                small.width(),
                small.height()
            )));
        }
    }
    Ok(())
}
