use std::collections::HashMap;

use cfs_core::infotheory::{
    epsilon_of, random_instance, verify_additive_decomposition, verify_joint_training_bound, verify_theorem1,
    verify_theorem1_twosided, verify_theorem2, InstanceKind, Rv, TheoryInstance, Universe,
};
use cfs_core::Rng;
use proptest::prelude::*;

/// Brute-force entropy: enumerate the full `(x, s, z, a, b)` table and
/// marginalize with a hash map.
struct Oracle {
    rows: Vec<([usize; 5], f64)>,
}

impl Oracle {
    fn new(t: &TheoryInstance) -> Self {
        let (nx, ns, nz) = t.joint.sizes();
        let mut rows = Vec::new();
        for x in 0..nx {
            for s in 0..ns {
                for z in 0..nz {
                    rows.push(([x, s, z, t.reps.a()[x], t.reps.b()[x]], t.joint.prob(x, s, z)));
                }
            }
        }
        Self { rows }
    }

    fn h(&self, vars: &[Rv]) -> f64 {
        let slot = |v: &Rv| match v {
            Rv::X => 0,
            Rv::S => 1,
            Rv::Z => 2,
            Rv::A => 3,
            Rv::B => 4,
        };
        let mut m: HashMap<Vec<usize>, f64> = HashMap::new();
        for (key, p) in &self.rows {
            *m.entry(vars.iter().map(|v| key[slot(v)]).collect()).or_default() += p;
        }
        -m.values().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
    }

    fn cmi(&self, u: &[Rv], v: &[Rv], w: &[Rv]) -> f64 {
        let cat = |a: &[Rv], b: &[Rv]| [a, b].concat();
        self.h(&cat(u, w)) + self.h(&cat(v, w)) - self.h(&cat(&cat(u, v), w)) - self.h(w)
    }
}

fn instance(seed: u64, near: bool) -> TheoryInstance {
    let kind = if near {
        InstanceKind::NearAssumption
    } else {
        InstanceKind::Dirichlet
    };
    random_instance(&mut Rng::new(seed), kind, 3, 9).unwrap()
}

const ALL: [Rv; 5] = [Rv::X, Rv::S, Rv::Z, Rv::A, Rv::B];

proptest! {
    #[test]
    fn entropies_and_informations_are_nonnegative(seed in any::<u64>(), near in any::<bool>()) {
        let t = instance(seed, near);
        let u = Universe::new(&t.joint, &t.reps).unwrap();
        for a in ALL {
            prop_assert!(u.h(&[a]) >= -1e-12);
            for b in ALL {
                let i = u.mi(&[a], &[b]);
                prop_assert!(i >= -1e-12, "I({a:?};{b:?}) = {i}");
                prop_assert!(i <= u.h(&[a]).min(u.h(&[b])) + 1e-12);
                for c in ALL {
                    prop_assert!(u.cmi(&[a], &[b], &[c]) >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn chain_rule_against_brute_force(seed in any::<u64>(), near in any::<bool>()) {
        let t = instance(seed, near);
        let u = Universe::new(&t.joint, &t.reps).unwrap();
        let o = Oracle::new(&t);
        let lhs = u.mi(&[Rv::A], &[Rv::X, Rv::S]);
        let rhs = o.cmi(&[Rv::A], &[Rv::S], &[]) + o.cmi(&[Rv::A], &[Rv::X], &[Rv::S]);
        prop_assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn epsilon_matches_six_term_recompute(seed in any::<u64>(), near in any::<bool>()) {
        let t = instance(seed, near);
        let o = Oracle::new(&t);
        let want = [
            o.cmi(&[Rv::S], &[Rv::Z], &[]),
            o.h(&[Rv::X, Rv::S, Rv::Z]) - o.h(&[Rv::S, Rv::Z]),
            o.h(&[Rv::S, Rv::X, Rv::Z]) - o.h(&[Rv::X, Rv::Z]),
            o.h(&[Rv::Z, Rv::X, Rv::S]) - o.h(&[Rv::X, Rv::S]),
            o.cmi(&[Rv::S], &[Rv::Z], &[Rv::B]),
            o.cmi(&[Rv::S], &[Rv::Z], &[Rv::A]),
        ];
        let e = epsilon_of(&t.joint, &t.reps).unwrap();
        for (got, want) in e.terms().iter().zip(want) {
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let max = want.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((e.value - max).abs() < 1e-12);
    }

    #[test]
    fn every_verifier_holds(seed in any::<u64>(), near in any::<bool>()) {
        let t = instance(seed, near);
        let (j, r) = (&t.joint, &t.reps);
        let mut reports = vec![verify_theorem1(j, r).unwrap(), verify_joint_training_bound(j, r).unwrap()];
        let (a, b) = verify_theorem1_twosided(j, r).unwrap();
        reports.extend([a, b]);
        let (a, b) = verify_theorem2(j, r).unwrap();
        reports.extend([a, b]);
        let (a, b) = verify_additive_decomposition(j, r).unwrap();
        reports.extend([a, b]);
        for rep in reports {
            prop_assert!(rep.holds, "{} slack {}", rep.name, rep.slack);
            prop_assert_eq!(rep.holds, rep.slack >= -1e-9);
        }
    }
}
