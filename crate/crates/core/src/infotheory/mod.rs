//! Exact information measures over finite joints `p(x, s, z)` with
//! deterministic representations `a(x)`, `b(x)`, and numerical checks of the
//! two-stage representation bounds built on them.
//!
//! Discrete quantities are in bits. The Gaussian MSE check works in nats;
//! [`bits_to_nats`] / [`nats_to_bits`] are the only conversions.

mod bounds;
mod gaussian;
mod joint;
mod random;

pub use bounds::{
    epsilon_of, verify_additive_decomposition, verify_joint_training_bound, verify_theorem1, verify_theorem1_twosided,
    verify_theorem2, BoundReport, Epsilon, TrialRecord, SLACK_TOLERANCE,
};
pub use gaussian::{mse_mi_gaussian_check, GaussianCheck};
pub use joint::{binary_entropy, entropy_bits, DiscreteJoint, RepMap, Rv, Universe};
pub use random::{random_instance, InstanceKind, TheoryInstance};

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
