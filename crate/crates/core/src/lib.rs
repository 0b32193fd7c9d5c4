//! Bayesian neural networks with latent input variables.
//!
//! The crate covers the full pipeline around these models:
//!
//! - [`mlp`]: rectifier feedforward networks with exact reverse-mode gradients
//!   for both parameters and inputs.
//! - [`bnn`]: factorized Gaussian posterior over weights and per-datapoint
//!   latents, trained with a black-box α-divergence energy.
//! - [`entropy`]: Kozachenko–Leonenko nearest-neighbour entropy estimation.
//! - [`decompose`]: total / aleatoric / epistemic entropy scores, acquisition
//!   and an active-learning loop, plus the law-of-total-variance split.
//! - [`envs`]: the two stochastic regression toys and a synthetic stochastic
//!   MDP with a batch data collector.
//! - [`policy`]: M×N model rollouts, the expected-cost, standard-deviation
//!   and model-bias risk objectives, pathwise policy gradients and
//!   evaluation against ground truth.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory; `cargo run --release --example <name>`.

pub mod bnn;
pub mod cli;
pub mod decompose;
pub mod entropy;
pub mod envs;
pub mod error;
pub mod io;
pub mod mlp;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
