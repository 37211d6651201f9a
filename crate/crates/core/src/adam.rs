//! Adam with bias correction, matching the PyTorch update rule
//! (`eps` added to the bias-corrected root second moment).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    /// One moment pair per parameter, shaped like `params`.
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Matrix>) -> Self {
        let (first, second) = params
            .into_iter()
            .map(|p| (Matrix::zeros(p.rows(), p.cols()), Matrix::zeros(p.rows(), p.cols())))
            .unzip();
        Self {
            config,
            first,
            second,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.first.len()
    }

    /// Applies one update. `params[i]` and `grads[i]` must match the shape the
    /// state was built with. A non-finite gradient aborts before any parameter
    /// is touched.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Contract(format!(
                "adam built for {} parameters, got {} params / {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            p.expect_same_shape(&self.first[i], "adam param")?;
            g.expect_same_shape(&self.first[i], "adam grad")?;
            if !g.is_finite() {
                return Err(Error::Training {
                    step: self.step + 1,
                    what: format!("non-finite gradient for parameter {i}"),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2_sqrt = (1.0 - beta2.powi(t)).sqrt();
        let step_size = lr / bc1;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (((w, &gj), mj), vj) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mj = beta1 * *mj + (1.0 - beta1) * gj;
                *vj = beta2 * *vj + (1.0 - beta2) * gj * gj;
                let denom = vj.sqrt() / bc2_sqrt + eps;
                *w -= step_size * *mj / denom;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let before = p.clone();
        let mut adam = AdamState::new(AdamConfig::default(), [&p]);
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[Matrix::zeros(2, 2)]).unwrap();
        }
        assert!(p.bit_eq(&before));
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig::default();
        for g in [1e-3, 0.05, 1.0, -3.0, 250.0] {
            let mut p = Matrix::scalar(0.0);
            let mut adam = AdamState::new(cfg, [&p]);
            adam.step(&mut [&mut p], &[Matrix::scalar(g)]).unwrap();
            // m̂ = g, v̂ = g², so the step is lr·|g|/(|g| + eps).
            let expect = cfg.lr * g.abs() / (g.abs() + cfg.eps);
            assert!((p.item().unwrap().abs() - expect).abs() < 1e-15, "g = {g}");
            assert!((p.item().unwrap().abs() - cfg.lr).abs() < 1e-8);
            assert_eq!(p.item().unwrap().signum(), -g.signum());
        }
    }

    #[test]
    fn nan_gradient_reports_step() {
        let mut p = Matrix::scalar(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), [&p]);
        adam.step(&mut [&mut p], &[Matrix::scalar(1.0)]).unwrap();
        let err = adam.step(&mut [&mut p], &[Matrix::scalar(f64::NAN)]).unwrap_err();
        assert!(matches!(err, Error::Training { step: 2, .. }), "{err}");
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let run = || {
            let mut p = Matrix::from_rows(&[&[0.3, -0.7, 1.1]]);
            let mut adam = AdamState::new(AdamConfig::default(), [&p]);
            for i in 0..200 {
                let g = p.map(|w| 2.0 * (w - 0.25) + (i as f64 * 0.01).sin());
                adam.step(&mut [&mut p], &[g]).unwrap();
            }
            p
        };
        assert!(run().bit_eq(&run()));
    }
}
