use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureSet;

/// Side of the central window used by [`central_fraction`] on 28×28 images.
pub const CENTRAL_WINDOW: usize = 16;

/// Fraction of selected pixels inside the centred `window × window` square
/// of a `side × side` image. Zero for an empty selection.
pub fn central_fraction(features: &FeatureSet, side: usize, window: usize) -> Result<f64> {
    if window > side {
        return Err(Error::Contract(format!(
            "window {window} larger than image side {side}"
        )));
    }
    features.validate(Some(side * side))?;
    if features.indices.is_empty() {
        return Ok(0.0);
    }
    let lo = (side - window) / 2;
    let hi = lo + window;
    let inside = features
        .indices
        .iter()
        .filter(|&&i| {
            let (r, c) = (i / side, i % side);
            (lo..hi).contains(&r) && (lo..hi).contains(&c)
        })
        .count();
    Ok(inside as f64 / features.indices.len() as f64)
}

/// Binary PGM (P5) bytes: 255 at selected pixels, 0 elsewhere.
pub fn pgm_mask(features: &FeatureSet, width: usize, height: usize) -> Result<Vec<u8>> {
    features.validate(Some(width * height))?;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let start = out.len();
    out.resize(start + width * height, 0);
    for &i in &features.indices {
        out[start + i] = 255;
    }
    Ok(out)
}

pub fn write_pgm_mask(path: &Path, features: &FeatureSet, width: usize, height: usize) -> Result<()> {
    let bytes = pgm_mask(features, width, height)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_corner_pixel() {
        let fs = FeatureSet::new(vec![0], 784, vec![]).unwrap();
        let bytes = pgm_mask(&fs, 28, 28).unwrap();
        let header = b"P5\n28 28\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        assert_eq!(body.len(), 784);
        assert_eq!(body[0], 255);
        assert_eq!(body.iter().filter(|&&b| b == 255).count(), 1);
    }

    #[test]
    fn central_window_counts() {
        // (6,6) and (21,21) are inside; (5,6) and (22,10) are not
        let idx = vec![6 * 28 + 6, 21 * 28 + 21, 5 * 28 + 6, 22 * 28 + 10];
        let fs = FeatureSet::new(idx, 784, vec![]).unwrap();
        assert_eq!(central_fraction(&fs, 28, CENTRAL_WINDOW).unwrap(), 0.5);
    }
}
