use crate::error::{Error, Result};

pub const MAX_PROBES: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSearch {
    pub lambda: f64,
    pub open: usize,
    /// Every `(λ, open gates)` probe in order.
    pub probes: Vec<(f64, usize)>,
    /// Whether `open` is within ±10% of the target count. When false the
    /// caller should fall back to top-`k` extraction.
    pub within_tolerance: bool,
}

fn close_enough(open: usize, target: usize) -> bool {
    (open as f64 - target as f64).abs() <= 0.1 * target as f64 + 1e-9
}

/// Finds λ leaving about `target_k` gates open. `train` retrains from scratch
/// for a given λ and reports the open-gate count, which is expected to
/// shrink as λ grows. The bracket `(lo, hi)` is widened by factors of 10
/// while it fails to bracket, then bisected in log space, with at most
/// [`MAX_PROBES`] calls in total.
pub fn tune_lambda(
    mut train: impl FnMut(f64) -> Result<usize>,
    target_k: usize,
    bounds: (f64, f64),
) -> Result<LambdaSearch> {
    let (mut lo, mut hi) = bounds;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!(
            "lambda bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let mut probes: Vec<(f64, usize)> = Vec::new();
    let mut probe = |lambda: f64, probes: &mut Vec<(f64, usize)>| -> Result<usize> {
        let open = train(lambda)?;
        log::debug!("lambda probe {lambda:.6e}: {open} open gates");
        probes.push((lambda, open));
        Ok(open)
    };
    let done = |lambda: f64, open: usize, probes: Vec<(f64, usize)>| LambdaSearch {
        lambda,
        open,
        probes,
        within_tolerance: true,
    };

    let mut c_lo = probe(lo, &mut probes)?;
    if close_enough(c_lo, target_k) {
        return Ok(done(lo, c_lo, probes));
    }
    let mut c_hi = probe(hi, &mut probes)?;
    if close_enough(c_hi, target_k) {
        return Ok(done(hi, c_hi, probes));
    }
    while c_lo < target_k && probes.len() < MAX_PROBES {
        hi = lo;
        c_hi = c_lo;
        lo /= 10.0;
        c_lo = probe(lo, &mut probes)?;
        if close_enough(c_lo, target_k) {
            return Ok(done(lo, c_lo, probes));
        }
    }
    while c_hi > target_k && probes.len() < MAX_PROBES {
        lo = hi;
        c_lo = c_hi;
        hi *= 10.0;
        c_hi = probe(hi, &mut probes)?;
        if close_enough(c_hi, target_k) {
            return Ok(done(hi, c_hi, probes));
        }
    }
    if c_lo < target_k || c_hi > target_k {
        return Err(Error::Search(format!(
            "could not bracket {target_k} open gates; probes (lambda, open): {probes:?}"
        )));
    }
    while probes.len() < MAX_PROBES {
        let mid = (lo * hi).sqrt();
        let c = probe(mid, &mut probes)?;
        if close_enough(c, target_k) {
            return Ok(done(mid, c, probes));
        }
        if c > target_k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // prefer the closest count, then a count that still covers k
    let &(lambda, open) = probes
        .iter()
        .min_by_key(|(_, c)| ((*c as i64 - target_k as i64).abs(), *c < target_k))
        .expect("at least one probe");
    log::warn!("lambda search ended at {open} open gates for target {target_k}; falling back to top-k extraction");
    Ok(LambdaSearch {
        lambda,
        open,
        probes,
        within_tolerance: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Synthetic monotone response `open(λ) = round(100 / (1 + 10 λ))`.
    fn response(lambda: f64) -> usize {
        (100.0 / (1.0 + 10.0 * lambda)).round() as usize
    }

    #[test]
    fn finds_target_count() {
        let s = tune_lambda(|l| Ok(response(l)), 20, (1e-3, 10.0)).unwrap();
        assert!(s.within_tolerance);
        assert!((18..=22).contains(&s.open), "{s:?}");
        assert!(s.probes.len() <= MAX_PROBES);
    }

    #[test]
    fn widens_bracket() {
        let s = tune_lambda(|l| Ok(response(l)), 50, (1.0, 10.0)).unwrap();
        assert!(s.within_tolerance, "{s:?}");
        assert!(s.probes.iter().any(|&(l, _)| l < 1.0));
    }

    #[test]
    fn reports_unreachable_targets() {
        let err = tune_lambda(|_| Ok(5), 20, (1e-3, 10.0)).unwrap_err();
        assert!(matches!(err, Error::Search(_)));
    }

    #[test]
    fn falls_back_when_count_jumps() {
        // count jumps from 30 to 10 with nothing in between
        let s = tune_lambda(|l| Ok(if l < 0.3 { 30 } else { 10 }), 20, (1e-3, 10.0)).unwrap();
        assert!(!s.within_tolerance);
        assert!(s.probes.len() <= MAX_PROBES);
        assert_eq!(s.open, 30);
    }
}
