use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Rescales every column to `[0, 1]`; constant columns become all zeros.
pub fn minmax_normalize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for c in 0..m.cols() {
        let (lo, hi) = (0..m.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            let v = m.get(r, c);
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        for r in 0..m.rows() {
            let v = if range > 0.0 { (m.get(r, c) - lo) / range } else { 0.0 };
            out.set(r, c, v);
        }
    }
    out
}

/// Scales each row of a count matrix to the median library size (row sum),
/// then applies `ln(1 + x)`. All-zero rows stay zero.
pub fn log1p_libsize_normalize(counts: &Matrix) -> Result<Matrix> {
    if let Some(v) = counts.data().iter().find(|v| **v < 0.0) {
        return Err(Error::Contract(format!("counts must be nonnegative, found {v}")));
    }
    let sizes: Vec<f64> = (0..counts.rows()).map(|r| counts.row(r).iter().sum()).collect();
    let target = median(&sizes);
    let mut out = counts.clone();
    for (r, &size) in sizes.iter().enumerate() {
        let factor = if size > 0.0 { target / size } else { 0.0 };
        for v in out.row_mut(r) {
            *v = (*v * factor).ln_1p();
        }
    }
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
