use cfs_core::gates::{AnnealSchedule, ConcreteSelector, GateVector};
use cfs_core::{Matrix, Rng};
use proptest::collection::vec;
use proptest::prelude::*;

/// Top-k by repeated extraction of the first maximum.
fn top_k_oracle(mu: &[f64], k: usize) -> Vec<usize> {
    let mut taken = vec![false; mu.len()];
    let mut out = Vec::new();
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..mu.len() {
            if !taken[i] && best.is_none_or(|b| mu[i] > mu[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out.sort_unstable();
    out
}

fn selector(k: usize, d: usize, temperature: f64, seed: u64) -> ConcreteSelector {
    let mut rng = Rng::new(seed);
    let mut sel = ConcreteSelector::init(k, d, AnnealSchedule::new(10.0, 0.1, 10).unwrap(), &mut rng).unwrap();
    sel.log_alpha = rng.normal_matrix(k, d, 2.0);
    sel.temperature = temperature;
    sel
}

fn row_max(m: &Matrix, r: usize) -> f64 {
    m.row(r).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #[test]
    fn samples_lie_in_unit_interval(mu in vec(-3.0..3.0f64, 1..16), sigma in 0.01..2.0f64, seed in any::<u64>()) {
        let g = GateVector::new(mu, sigma, 1.0).unwrap();
        let mut rng = Rng::new(seed);
        for _ in 0..20 {
            prop_assert!(g.sample(&mut rng).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn unclamped_preimage_is_centered_on_mu(mu in vec(-1.0..2.0f64, 1..6), seed in any::<u64>()) {
        let g = GateVector::new(mu.clone(), 0.5, 1.0).unwrap();
        let n = 4000;
        let noise = g.noise(n, &mut Rng::new(seed));
        let means = noise.col_means();
        for (j, m) in mu.iter().enumerate() {
            let pre = m + means.get(0, j);
            // five standard errors
            prop_assert!((pre - m).abs() < 5.0 * 0.5 / (n as f64).sqrt());
        }
    }

    #[test]
    fn penalty_is_monotone(mu in vec(-2.0..2.0f64, 1..10), i in any::<prop::sample::Index>(), bump in 0.0..1.0f64,
                           lambda in 0.0..5.0f64, extra in 0.0..5.0f64) {
        let base = GateVector::new(mu.clone(), 0.5, lambda).unwrap();
        let mut raised = mu.clone();
        raised[i.index(mu.len())] += bump;
        prop_assert!(GateVector::new(raised, 0.5, lambda).unwrap().penalty() >= base.penalty());
        prop_assert!(GateVector::new(mu, 0.5, lambda + extra).unwrap().penalty() >= base.penalty());
    }

    #[test]
    fn top_k_matches_extraction_oracle(mu in vec(prop_oneof![Just(0.0), Just(0.5), -1.0..1.0f64], 1..20),
                                       k in any::<prop::sample::Index>()) {
        let k = k.index(mu.len() + 1);
        let g = GateVector::new(mu.clone(), 0.5, 1.0).unwrap();
        prop_assert_eq!(g.top_k(k).unwrap().indices, top_k_oracle(&mu, k));
    }

    #[test]
    fn concrete_rows_are_distributions(k in 1..5usize, d in 1..12usize, t in 1e-4..50.0f64, seed in any::<u64>()) {
        let sel = selector(k, d, t, seed);
        let s = sel.sample(&mut Rng::new(seed ^ 1)).unwrap();
        for r in 0..k {
            let sum: f64 = s.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "{sum}");
            prop_assert!(s.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn colder_samples_are_sharper(k in 1..4usize, d in 2..10usize, hot in 0.05..20.0f64, ratio in 0.01..1.0f64,
                                  seed in any::<u64>()) {
        let hot_sel = selector(k, d, hot, seed);
        let cold_sel = selector(k, d, hot * ratio, seed);
        let mut rng = Rng::new(seed ^ 2);
        let mut hot_total = 0.0;
        let mut cold_total = 0.0;
        for _ in 0..1000 {
            let g = rng.gumbel_matrix(k, d);
            let (a, b) = (hot_sel.sample_with(&g).unwrap(), cold_sel.sample_with(&g).unwrap());
            for r in 0..k {
                hot_total += row_max(&a, r);
                cold_total += row_max(&b, r);
            }
        }
        prop_assert!(cold_total >= hot_total - 1e-9, "{cold_total} < {hot_total}");
    }
}
