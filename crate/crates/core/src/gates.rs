//! Differentiable feature-selection layers.
//!
//! * [`GateVector`]: stochastic gates `G_i = clamp(μ_i + ζ_i, 0, 1)` with
//!   `ζ_i ~ N(0, σ²)` and the open-gate penalty `λ Σ_i Φ(μ_i / σ)`.
//! * [`ConcreteSelector`]: `k` Gumbel-softmax rows over the `d` inputs whose
//!   temperature is annealed geometrically from `T0` to `TB`.

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::special::normal_cdf;
use crate::tape::{softmax_rows, Tape, Var};

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_MU_INIT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct GateVector {
    pub mu: Vec<f64>,
    sigma: f64,
    lambda: f64,
}

impl GateVector {
    pub fn new(mu: Vec<f64>, sigma: f64, lambda: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("gate sigma must be positive, got {sigma}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("gate lambda must be nonnegative, got {lambda}")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("gate means must be finite".into()));
        }
        Ok(Self { mu, sigma, lambda })
    }

    /// Every gate half open (`μ_i = 0.5`).
    pub fn init(d: usize, sigma: f64, lambda: f64) -> Result<Self> {
        Self::new(vec![DEFAULT_MU_INIT; d], sigma, lambda)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu_row(&self) -> Matrix {
        Matrix::row_vector(&self.mu)
    }

    pub fn set_mu(&mut self, row: &Matrix) -> Result<()> {
        if row.shape() != (1, self.mu.len()) {
            return Err(Error::Shape {
                op: "set_mu",
                lhs: (1, self.mu.len()),
                rhs: row.shape(),
            });
        }
        self.mu.copy_from_slice(row.data());
        Ok(())
    }

    /// One gate sample with explicit noise `zeta` (already scaled by σ).
    pub fn sample_with(&self, zeta: &[f64]) -> Vec<f64> {
        self.mu.iter().zip(zeta).map(|(m, z)| (m + z).clamp(0.0, 1.0)).collect()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let zeta: Vec<f64> = (0..self.mu.len()).map(|_| self.sigma * rng.normal()).collect();
        self.sample_with(&zeta)
    }

    /// `rows × d` noise matrix with entries `N(0, σ²)`, one row per example.
    pub fn noise(&self, rows: usize, rng: &mut Rng) -> Matrix {
        rng.normal_matrix(rows, self.mu.len(), self.sigma)
    }

    /// Gate matrix `clamp(μ + ζ, 0, 1)` on the tape, differentiable in `mu`.
    pub fn sample_on_tape(tape: &mut Tape, mu: Var, noise: Var) -> Result<Var> {
        let pre = tape.add_row(noise, mu)?;
        tape.clamp(pre, 0.0, 1.0)
    }

    /// Noise-free gates `clamp(μ, 0, 1)`, used at evaluation time.
    pub fn deterministic(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m.clamp(0.0, 1.0)).collect()
    }

    /// `λ Σ_i Φ(μ_i / σ)`.
    pub fn penalty(&self) -> f64 {
        self.lambda * self.mu.iter().map(|m| normal_cdf(m / self.sigma)).sum::<f64>()
    }

    pub fn penalty_on_tape(&self, tape: &mut Tape, mu: Var) -> Result<Var> {
        let cdf = tape.normal_cdf(mu, self.sigma)?;
        let total = tape.sum(cdf)?;
        tape.scale(total, self.lambda)
    }

    /// Number of gates with `μ_i > 0`.
    pub fn open_count(&self) -> usize {
        self.mu.iter().filter(|&&m| m > 0.0).count()
    }

    /// Indices of the `k` largest means, ties broken toward the lower index.
    pub fn top_k(&self, k: usize) -> Result<FeatureSet> {
        if k > self.mu.len() {
            return Err(Error::Contract(format!(
                "cannot select {k} of {} features",
                self.mu.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.mu.len()).collect();
        order.sort_by(|&a, &b| self.mu[b].total_cmp(&self.mu[a]).then(a.cmp(&b)));
        order.truncate(k);
        FeatureSet::new(order, self.mu.len(), self.mu.clone())
    }
}

/// Geometric temperature schedule `T(b) = T0 (TB/T0)^(b/B)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub tb: f64,
    pub epochs: usize,
}

impl AnnealSchedule {
    pub fn new(t0: f64, tb: f64, epochs: usize) -> Result<Self> {
        if !(t0 > 0.0 && tb > 0.0) {
            return Err(Error::Config(format!(
                "temperatures must be positive, got {t0} and {tb}"
            )));
        }
        Ok(Self { t0, tb, epochs })
    }

    pub fn at(&self, epoch: usize) -> Result<f64> {
        concrete_schedule(self.t0, self.tb, self.epochs, epoch)
    }
}

pub fn concrete_schedule(t0: f64, tb: f64, total: usize, epoch: usize) -> Result<f64> {
    if !(t0 > 0.0 && tb > 0.0) {
        return Err(Error::Contract(format!(
            "temperatures must be positive, got {t0} and {tb}"
        )));
    }
    if epoch > total {
        return Err(Error::Contract(format!("epoch {epoch} past the schedule end {total}")));
    }
    if total == 0 {
        return Ok(t0);
    }
    if epoch == total {
        return Ok(tb);
    }
    Ok(t0 * (tb / t0).powf(epoch as f64 / total as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteSelector {
    /// `k × d` logits `log α`.
    pub log_alpha: Matrix,
    pub temperature: f64,
    pub schedule: AnnealSchedule,
}

/// Result of replacing the concrete layer by its argmax.
#[derive(Clone, Debug, PartialEq)]
pub struct Hardened {
    /// Argmax feature of each selector row, in row order.
    pub per_row: Vec<usize>,
    /// Distinct selected features.
    pub features: FeatureSet,
    /// Rows whose argmax repeated an earlier row's.
    pub duplicates: usize,
}

impl ConcreteSelector {
    /// `log α` drawn uniformly from `[ln 0.01, ln 0.02]`.
    pub fn init(k: usize, d: usize, schedule: AnnealSchedule, rng: &mut Rng) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Config(format!(
                "concrete selector needs k, d > 0 (got {k}, {d})"
            )));
        }
        Ok(Self {
            log_alpha: rng.uniform_matrix(k, d, 0.01f64.ln(), 0.02f64.ln()),
            temperature: schedule.t0,
            schedule,
        })
    }

    pub fn k(&self) -> usize {
        self.log_alpha.rows()
    }

    pub fn d(&self) -> usize {
        self.log_alpha.cols()
    }

    pub fn set_epoch(&mut self, epoch: usize) -> Result<()> {
        self.temperature = self.schedule.at(epoch)?;
        Ok(())
    }

    /// Row-stochastic `k × d` sample `softmax((log α + g) / T)` for given
    /// Gumbel noise `g`.
    pub fn sample_with(&self, gumbel: &Matrix) -> Result<Matrix> {
        check_temperature(self.temperature)?;
        let logits = self.log_alpha.add(gumbel)?.scale(1.0 / self.temperature);
        Ok(softmax_rows(&logits))
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<Matrix> {
        let g = rng.gumbel_matrix(self.k(), self.d());
        self.sample_with(&g)
    }

    pub fn sample_on_tape(tape: &mut Tape, log_alpha: Var, gumbel: Var, temperature: f64) -> Result<Var> {
        check_temperature(temperature)?;
        let perturbed = tape.add(log_alpha, gumbel)?;
        let scaled = tape.scale(perturbed, 1.0 / temperature)?;
        tape.row_softmax(scaled)
    }

    /// Mean over rows of the largest noise-free selection probability
    /// `max_j softmax(log α / T)_j`; training stops once it passes 0.99.
    pub fn mean_max_probability(&self) -> f64 {
        let probs = softmax_rows(&self.log_alpha.scale(1.0 / self.temperature));
        let total: f64 = (0..probs.rows())
            .map(|r| probs.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .sum();
        total / probs.rows() as f64
    }

    pub fn harden(&self) -> Result<Hardened> {
        let per_row: Vec<usize> = (0..self.k())
            .map(|r| {
                let row = self.log_alpha.row(r);
                // first maximum wins
                let mut best = 0;
                for (j, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect();
        let mut distinct = per_row.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let duplicates = per_row.len() - distinct.len();
        // per-feature score: the strongest logit any row puts on it
        let scores: Vec<f64> = (0..self.d())
            .map(|j| {
                (0..self.k())
                    .map(|r| self.log_alpha.get(r, j))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(Hardened {
            features: FeatureSet::new(distinct, self.d(), scores)?,
            per_row,
            duplicates,
        })
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Contract(format!("temperature must be positive, got {t}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gates(mu: &[f64]) -> GateVector {
        GateVector::new(mu.to_vec(), 0.5, 1.0).unwrap()
    }

    #[test]
    fn sample_clamps() {
        let g = gates(&[2.0, -1.0, 0.3]);
        assert_eq!(g.sample_with(&[0.9, 0.2, 0.25]), vec![1.0, 0.0, 0.55]);
        assert_eq!(g.sample_with(&[-0.99, 0.2, 0.25])[0], 1.0);
    }

    #[test]
    fn sample_within_unit_interval() {
        let g = gates(&[-2.0, -0.1, 0.0, 0.4, 0.9, 3.0]);
        let mut rng = Rng::new(5);
        for _ in 0..1000 {
            assert!(g.sample(&mut rng).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn deterministic_gates() {
        assert_eq!(gates(&[2.0, -1.0, 0.5]).deterministic(), vec![1.0, 0.0, 0.5]);
        assert_eq!(gates(&[0.0, 0.0]).deterministic(), vec![0.0, 0.0]);
    }

    #[test]
    fn deterministic_is_small_noise_limit() {
        let mu = [-0.3, 0.2, 0.7, 1.4];
        let g = GateVector::new(mu.to_vec(), 1e-4, 1.0).unwrap();
        let mut rng = Rng::new(11);
        let n = 100_000;
        let mut mean = [0.0; 4];
        for _ in 0..n {
            for (m, v) in mean.iter_mut().zip(g.sample(&mut rng)) {
                *m += v / n as f64;
            }
        }
        for (m, e) in mean.iter().zip(g.deterministic()) {
            assert!((m - e).abs() < 1e-3);
        }
    }

    #[test]
    fn penalty_values() {
        let g = GateVector::new(vec![0.0; 10], 0.5, 1.0).unwrap();
        assert_eq!(g.penalty(), 5.0);
        let g = GateVector::new(vec![1e6; 7], 0.5, 3.0).unwrap();
        assert!((g.penalty() - 21.0).abs() < 1e-12);
        let g = GateVector::new(vec![0.5], 0.5, 2.0).unwrap();
        // 2·Φ(1), Φ(1) from Simpson quadrature of the density
        assert!((g.penalty() - 1.682_689_492_137_086).abs() < 1e-7);
    }

    #[test]
    fn open_counts() {
        assert_eq!(gates(&[0.2, -0.1, 0.0]).open_count(), 1);
        assert_eq!(gates(&[-0.2, -0.1]).open_count(), 0);
        assert_eq!(gates(&[0.2, 0.1, 3.0]).open_count(), 3);
    }

    #[test]
    fn top_k_selection() {
        assert_eq!(gates(&[0.9, -0.2, 0.4]).top_k(2).unwrap().indices, vec![0, 2]);
        assert_eq!(gates(&[0.9, -0.2, 0.4]).top_k(3).unwrap().indices, vec![0, 1, 2]);
        assert_eq!(gates(&[0.5, 0.5, 0.1]).top_k(1).unwrap().indices, vec![0]);
        assert!(gates(&[0.5]).top_k(2).is_err());
    }

    #[test]
    fn invalid_gate_parameters() {
        assert!(GateVector::new(vec![0.0], 0.0, 1.0).is_err());
        assert!(GateVector::new(vec![0.0], 0.5, -1.0).is_err());
        assert!(GateVector::new(vec![f64::NAN], 0.5, 1.0).is_err());
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(concrete_schedule(10.0, 0.1, 200, 0).unwrap(), 10.0);
        assert_eq!(concrete_schedule(10.0, 0.1, 200, 200).unwrap(), 0.1);
        assert!((concrete_schedule(10.0, 0.1, 200, 100).unwrap() - 1.0).abs() < 1e-12);
        assert!((concrete_schedule(4.0, 0.25, 10, 5).unwrap() - 1.0).abs() < 1e-12);
        assert!(concrete_schedule(10.0, 0.1, 20, 21).is_err());
    }

    fn selector(log_alpha: Matrix, t: f64) -> ConcreteSelector {
        ConcreteSelector {
            log_alpha,
            temperature: t,
            schedule: AnnealSchedule::new(10.0, 0.1, 10).unwrap(),
        }
    }

    #[test]
    fn equal_logits_give_uniform_rows() {
        let sel = selector(Matrix::filled(2, 4, 0.3), 1.0);
        let m = sel.sample_with(&Matrix::filled(2, 4, 0.7)).unwrap();
        assert!(m.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn cold_sample_is_one_hot_at_argmax() {
        let mut rng = Rng::new(8);
        let sel = selector(rng.normal_matrix(3, 6, 1.0), 1e-6);
        let g = rng.gumbel_matrix(3, 6);
        let m = sel.sample_with(&g).unwrap();
        let perturbed = sel.log_alpha.add(&g).unwrap();
        for r in 0..3 {
            let row = perturbed.row(r);
            let arg = (0..6).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!(m.get(r, arg) > 1.0 - 1e-6);
        }
    }

    #[test]
    fn harden_collapses_duplicates() {
        let sel = selector(Matrix::from_rows(&[&[0.1, 3.0, 0.2]]), 1.0);
        assert_eq!(sel.harden().unwrap().per_row, vec![1]);

        let sel = selector(Matrix::from_rows(&[&[0.1, 3.0, 0.2], &[0.0, 2.0, 1.0]]), 1.0);
        let h = sel.harden().unwrap();
        assert_eq!(h.features.indices, vec![1]);
        assert_eq!(h.duplicates, 1);

        let sel = selector(
            Matrix::from_rows(&[&[0.0, 0.0, 5.0], &[5.0, 0.0, 0.0], &[0.0, 5.0, 0.0]]),
            1.0,
        );
        let h = sel.harden().unwrap();
        assert_eq!(h.per_row, vec![2, 0, 1]);
        assert_eq!(h.features.indices, vec![0, 1, 2]);
        assert_eq!(h.duplicates, 0);
    }
}
