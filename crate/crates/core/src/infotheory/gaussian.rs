//! MSE-to-mutual-information lower bound on the scalar Gaussian channel
//! `x = a + n`, `a ~ N(0, va)`, `n ~ N(0, vn)`, where every term is analytic:
//!
//! `H(x) - ½ ln 2π - ½ MMSE <= I(a; x)`, with `H(x) = ½ ln(2πe(va + vn))`,
//! `MMSE = vn` (predicting `x` from `a`) and `I(a; x) = ½ ln(1 + va/vn)`.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianCheck {
    pub lhs_nats: f64,
    pub mi_nats: f64,
    pub holds: bool,
}

pub fn mse_mi_gaussian_check(var_signal: f64, var_noise: f64) -> Result<GaussianCheck> {
    if !(var_signal > 0.0 && var_noise > 0.0) || !var_signal.is_finite() || !var_noise.is_finite() {
        return Err(Error::Contract(format!(
            "variances must be positive and finite, got {var_signal} and {var_noise}"
        )));
    }
    let entropy = 0.5 * (2.0 * PI * E * (var_signal + var_noise)).ln();
    let lhs_nats = entropy - 0.5 * (2.0 * PI).ln() - 0.5 * var_noise;
    let mi_nats = 0.5 * (1.0 + var_signal / var_noise).ln();
    Ok(GaussianCheck {
        lhs_nats,
        mi_nats,
        holds: lhs_nats <= mi_nats + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_noise_is_tight() {
        let c = mse_mi_gaussian_check(1.0, 1.0).unwrap();
        let half_ln2 = 0.5 * std::f64::consts::LN_2;
        assert!((c.lhs_nats - half_ln2).abs() < 1e-12);
        assert!((c.mi_nats - half_ln2).abs() < 1e-12);
        assert!((c.lhs_nats - c.mi_nats).abs() < 1e-12 && c.holds);
    }

    #[test]
    fn closed_form_values() {
        let c = mse_mi_gaussian_check(1.0, 2.0).unwrap();
        assert!((c.lhs_nats - (0.5 * 3f64.ln() - 0.5)).abs() < 1e-12);
        assert!((c.lhs_nats - 0.049_306_144_334_054_8).abs() < 1e-12);
        assert!((c.mi_nats - 0.5 * 1.5f64.ln()).abs() < 1e-12);
        assert!(c.holds);
    }

    #[test]
    fn large_noise_goes_vacuous() {
        let c = mse_mi_gaussian_check(1.0, 1e6).unwrap();
        assert!(c.lhs_nats < -1e5);
        assert!(c.mi_nats > 0.0 && c.mi_nats < 1e-5);
    }

    #[test]
    fn rejects_nonpositive_variances() {
        assert!(mse_mi_gaussian_check(0.0, 1.0).is_err());
        assert!(mse_mi_gaussian_check(1.0, -1.0).is_err());
    }
}
