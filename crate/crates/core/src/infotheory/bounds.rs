use crate::error::Result;

use super::joint::{DiscreteJoint, RepMap, Rv, Universe};
use Rv::*;

/// A bound holds when `rhs - lhs >= -SLACK_TOLERANCE`.
pub const SLACK_TOLERANCE: f64 = 1e-9;

/// Every quantity entering one inequality `lhs <= rhs`, in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub name: &'static str,
    pub terms: Vec<(&'static str, f64)>,
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundReport {
    fn new(name: &'static str, terms: Vec<(&'static str, f64)>, epsilon: f64, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name,
            terms,
            epsilon,
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOLERANCE,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

/// The six assumption quantities and their maximum ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Epsilon {
    pub value: f64,
    pub i_s_z: f64,
    pub h_x_given_sz: f64,
    pub h_s_given_xz: f64,
    pub h_z_given_xs: f64,
    pub i_s_z_given_b: f64,
    pub i_s_z_given_a: f64,
}

impl Epsilon {
    pub fn terms(&self) -> [f64; 6] {
        [
            self.i_s_z,
            self.h_x_given_sz,
            self.h_s_given_xz,
            self.h_z_given_xs,
            self.i_s_z_given_b,
            self.i_s_z_given_a,
        ]
    }
}

fn eps(u: &Universe) -> Epsilon {
    let mut e = Epsilon {
        value: 0.0,
        i_s_z: u.mi(&[S], &[Z]),
        h_x_given_sz: u.h_cond(&[X], &[S, Z]),
        h_s_given_xz: u.h_cond(&[S], &[X, Z]),
        h_z_given_xs: u.h_cond(&[Z], &[X, S]),
        i_s_z_given_b: u.cmi(&[S], &[Z], &[B]),
        i_s_z_given_a: u.cmi(&[S], &[Z], &[A]),
    };
    e.value = e.terms().into_iter().fold(0.0, f64::max);
    e
}

pub fn epsilon_of(joint: &DiscreteJoint, reps: &RepMap) -> Result<Epsilon> {
    Ok(eps(&Universe::new(joint, reps)?))
}

/// `I(a;x|b) + I(b;x|s) - H(z) - 4ε <= I(a;s)`.
pub fn verify_theorem1(joint: &DiscreteJoint, reps: &RepMap) -> Result<BoundReport> {
    let u = Universe::new(joint, reps)?;
    let e = eps(&u).value;
    let i_ax_b = u.cmi(&[A], &[X], &[B]);
    let i_bx_s = u.cmi(&[B], &[X], &[S]);
    let h_z = u.h(&[Z]);
    let i_as = u.mi(&[A], &[S]);
    Ok(BoundReport::new(
        "theorem1",
        vec![
            ("I(a;x|b)", i_ax_b),
            ("I(b;x|s)", i_bx_s),
            ("H(z)", h_z),
            ("I(a;s)", i_as),
        ],
        e,
        i_ax_b + i_bx_s - h_z - 4.0 * e,
        i_as,
    ))
}

/// Both sides of
/// `I(a;s) + 2I(b;x|s) - H(z) - H(b) - 6ε <= I(a;x|b) <= I(a;s) - I(b;x|s) + H(z) + 4ε`,
/// as `(lower, upper)` reports.
pub fn verify_theorem1_twosided(joint: &DiscreteJoint, reps: &RepMap) -> Result<(BoundReport, BoundReport)> {
    let u = Universe::new(joint, reps)?;
    let e = eps(&u).value;
    let i_ax_b = u.cmi(&[A], &[X], &[B]);
    let i_bx_s = u.cmi(&[B], &[X], &[S]);
    let h_z = u.h(&[Z]);
    let h_b = u.h(&[B]);
    let i_as = u.mi(&[A], &[S]);
    let terms = vec![
        ("I(a;x|b)", i_ax_b),
        ("I(b;x|s)", i_bx_s),
        ("H(z)", h_z),
        ("H(b)", h_b),
        ("I(a;s)", i_as),
    ];
    let lower = BoundReport::new(
        "theorem1_lower",
        terms.clone(),
        e,
        i_as + 2.0 * i_bx_s - h_z - h_b - 6.0 * e,
        i_ax_b,
    );
    let upper = BoundReport::new("theorem1_upper", terms, e, i_ax_b, i_as - i_bx_s + h_z + 4.0 * e);
    Ok((lower, upper))
}

/// `I(a,b;x) + I(b;x|s) - I(b;x) - H(z) - 4ε <= I(a;s)`.
pub fn verify_joint_training_bound(joint: &DiscreteJoint, reps: &RepMap) -> Result<BoundReport> {
    let u = Universe::new(joint, reps)?;
    let e = eps(&u).value;
    let i_ab_x = u.mi(&[A, B], &[X]);
    let i_bx_s = u.cmi(&[B], &[X], &[S]);
    let i_bx = u.mi(&[B], &[X]);
    let h_z = u.h(&[Z]);
    let i_as = u.mi(&[A], &[S]);
    Ok(BoundReport::new(
        "joint_training",
        vec![
            ("I(a,b;x)", i_ab_x),
            ("I(b;x|s)", i_bx_s),
            ("I(b;x)", i_bx),
            ("H(z)", h_z),
            ("I(a;s)", i_as),
        ],
        e,
        i_ab_x + i_bx_s - i_bx - h_z - 4.0 * e,
        i_as,
    ))
}

/// `I(a;x) - H(x) + I(x;s) <= I(a;s)` and the same with `z` in place of `s`.
/// Only the `a` map of `reps` is consulted.
pub fn verify_theorem2(joint: &DiscreteJoint, reps: &RepMap) -> Result<(BoundReport, BoundReport)> {
    let u = Universe::new(joint, reps)?;
    let i_ax = u.mi(&[A], &[X]);
    let h_x = u.h(&[X]);
    let mut out = Vec::with_capacity(2);
    for (name, latent) in [("theorem2_s", S), ("theorem2_z", Z)] {
        let i_x_l = u.mi(&[X], &[latent]);
        let i_a_l = u.mi(&[A], &[latent]);
        out.push(BoundReport::new(
            name,
            vec![
                ("I(a;x)", i_ax),
                ("H(x)", h_x),
                ("I(x;latent)", i_x_l),
                ("I(a;latent)", i_a_l),
            ],
            0.0,
            i_ax - h_x + i_x_l,
            i_a_l,
        ));
    }
    let z = out.pop().expect("two reports");
    let s = out.pop().expect("two reports");
    Ok((s, z))
}

/// `-ε <= I(a;x) - I(a;s) - I(a;z) <= 2ε`, as `(lower, upper)` reports.
pub fn verify_additive_decomposition(joint: &DiscreteJoint, reps: &RepMap) -> Result<(BoundReport, BoundReport)> {
    let u = Universe::new(joint, reps)?;
    let e = eps(&u).value;
    let i_ax = u.mi(&[A], &[X]);
    let i_as = u.mi(&[A], &[S]);
    let i_az = u.mi(&[A], &[Z]);
    let diff = i_ax - i_as - i_az;
    let terms = vec![("I(a;x)", i_ax), ("I(a;s)", i_as), ("I(a;z)", i_az)];
    Ok((
        BoundReport::new("additive_lower", terms.clone(), e, -e, diff),
        BoundReport::new("additive_upper", terms, e, diff, 2.0 * e),
    ))
}

/// Every bound evaluated on one instance, flattened for CSV output.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub kind: &'static str,
    pub sizes: [usize; 5],
    pub epsilon: f64,
    pub terms: Vec<(&'static str, f64)>,
    pub reports: Vec<BoundReport>,
}

impl TrialRecord {
    pub fn evaluate(trial: usize, seed: u64, kind: &'static str, joint: &DiscreteJoint, reps: &RepMap) -> Result<Self> {
        let u = Universe::new(joint, reps)?;
        let (nx, ns, nz) = joint.sizes();
        let na = reps.a().iter().max().map_or(1, |m| m + 1);
        let nb = reps.b().iter().max().map_or(1, |m| m + 1);
        let terms = vec![
            ("I_a_s", u.mi(&[A], &[S])),
            ("I_a_z", u.mi(&[A], &[Z])),
            ("I_a_x", u.mi(&[A], &[X])),
            ("I_a_x_given_b", u.cmi(&[A], &[X], &[B])),
            ("I_b_x_given_s", u.cmi(&[B], &[X], &[S])),
            ("I_b_x", u.mi(&[B], &[X])),
            ("I_ab_x", u.mi(&[A, B], &[X])),
            ("I_x_s", u.mi(&[X], &[S])),
            ("I_x_z", u.mi(&[X], &[Z])),
            ("H_x", u.h(&[X])),
            ("H_z", u.h(&[Z])),
            ("H_b", u.h(&[B])),
        ];
        let (lo, hi) = verify_theorem1_twosided(joint, reps)?;
        let (t2s, t2z) = verify_theorem2(joint, reps)?;
        let (al, au) = verify_additive_decomposition(joint, reps)?;
        let reports = vec![
            verify_theorem1(joint, reps)?,
            lo,
            hi,
            verify_joint_training_bound(joint, reps)?,
            t2s,
            t2z,
            al,
            au,
        ];
        Ok(Self {
            trial,
            seed,
            kind,
            sizes: [nx, ns, nz, na, nb],
            epsilon: eps(&u).value,
            terms,
            reports,
        })
    }

    pub fn holds(&self) -> bool {
        self.reports.iter().all(|r| r.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &BoundReport> {
        self.reports.iter().filter(|r| !r.holds)
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "trial".to_string(),
            "seed".into(),
            "kind".into(),
            "nx".into(),
            "ns".into(),
            "nz".into(),
            "na".into(),
            "nb".into(),
            "epsilon".into(),
        ];
        cols.extend(self.terms.iter().map(|(n, _)| n.to_string()));
        cols.extend(self.reports.iter().map(|r| format!("slack_{}", r.name)));
        cols.push("holds".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.trial.to_string(), self.seed.to_string(), self.kind.to_string()];
        cols.extend(self.sizes.iter().map(|s| s.to_string()));
        cols.push(self.epsilon.to_string());
        cols.extend(self.terms.iter().map(|(_, v)| v.to_string()));
        cols.extend(self.reports.iter().map(|r| r.slack.to_string()));
        cols.push(self.holds().to_string());
        cols.join(",")
    }
}
