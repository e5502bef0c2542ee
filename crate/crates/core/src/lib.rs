//! Bayesian structure learning for pairwise binary Markov random fields with a
//! spike-and-slab prior on the edge weights.
//!
//! The sampler alternates conjugate hyper-parameter draws, a single
//! preconditioned Langevin step on the continuous parameters (with gradient
//! expectations from persistent Gibbs particles) and reversible-jump edge
//! additions and deletions whose partition-function ratios come from a
//! second-order expansion. Small models can also be handled exactly by
//! enumerating all states, which is used as the reference sampler.

pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod hypers;
pub mod langevin;
pub mod matrix;
pub mod model;
pub mod rjmcmc;
pub mod rng;
pub mod states;
pub mod truncnorm;

pub use engine::{run, run_fixed_p0, Mode, PosteriorChain, SamplerConfig, Snapshot, SpikeSlabState};
pub use error::{Error, Result};
pub use matrix::BinaryMatrix;
pub use model::{compute_stats, DataStats, ModelSpec, Parameters};
