//! Steady velocity-field surrogate modeling with a two-tier network.
//!
//! Tier 1 is a dense network trained by Levenberg-Marquardt with Bayesian
//! evidence regularization ([`mlp`]). Tier 2 is a Kohonen self-organizing map
//! ([`som`]) trained on the tier-1 predictions plus a local Reynolds-number
//! feature. Periodic flow snapshots ([`field`]) and second-order finite
//! difference operators ([`nsops`]) provide the data and the physics checks.
//!
//! All reals are `f64` and every random draw comes from a seeded [`rng::SplitMix64`],
//! so every stage is a pure function of its inputs.

pub mod dataset;
pub mod error;
pub mod field;
pub mod mlp;
pub mod nsops;
pub mod pipeline;
pub mod rng;
pub mod som;

pub use error::{Error, Result};
