//! Contrastive feature selection.
//!
//! Picks the `k` features of a *target* dataset that best explain variation
//! absent from a *background* dataset. A background autoencoder `g`/`h` is
//! fitted first; stochastic gates over the target features are then trained
//! together with a reconstructor `f(g(x), x ⊙ G)`. Joint and stop-gradient
//! variants, a concrete-autoencoder baseline and a supervised gate baseline
//! share the same machinery.
//!
//! [`infotheory`] checks the accompanying mutual-information bounds exactly
//! on finite joint distributions.

pub mod adam;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod gates;
pub mod infotheory;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod selectors;
pub mod special;
pub mod tape;

pub use error::{Error, Result};
pub use features::FeatureSet;
pub use matrix::Matrix;
pub use rng::Rng;
