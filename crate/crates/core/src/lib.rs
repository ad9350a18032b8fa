//! Meta-learned likelihood-free Bayesian optimization.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: search spaces, observations, quantile labelling, regret and
//!   the bounding-box meta baseline.
//! - [`optim`]: flat parameter vectors, gradient checking, ADAM and L-BFGS
//!   with a strong-Wolfe line search.
//! - [`meta`]: the residual feature network, latent task embeddings, the
//!   regularised meta-loss and meta-training.
//! - [`adapt`]: MAP/Laplace adaptation of a target-task embedding, Thompson
//!   sampling and the probit predictive.
//! - [`gbt`]: gradient-boosted trees on the weighted classification loss with
//!   a pluggable base logit.
//! - [`bo`]: acquisition maximisation and the optimisation strategies.
//! - [`bench`]: synthetic function ensembles, noise and tabular benchmarks.
//!
//! All models operate on points encoded into the unit hypercube.

pub mod adapt;
pub mod bench;
pub mod bo;
pub mod data;
pub mod error;
pub mod gbt;
pub mod meta;
pub mod optim;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

/// Version of this crate, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
