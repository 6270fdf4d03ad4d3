//! Bayesian neural network local projections.
//!
//! This crate estimates nonlinear impulse responses to structural shocks.
//! A horseshoe-regularized Bayesian neural network regression is fit per
//! projection horizon with a multi-block MCMC sampler; structural shocks are
//! identified recursively from a VAR; responses are integrated over randomly
//! drawn histories to produce unconditional nonlinear local projections with
//! posterior credible bands.
//!
//! Modules:
//! - [`bnn`]: network containers, activations, forward pass, gradients.
//! - [`mcmc`]: the multi-block posterior sampler and chain orchestration.
//! - [`structural`]: VAR estimation and recursive shock identification.
//! - [`nlp`]: horizon datasets, sequential estimation, response integration.
//! - [`synth`]: synthetic data generators with closed-form ground truth.
//! - [`data`], [`config`], [`pipeline`], [`report`]: CSV ingestion,
//!   run configuration, end-to-end orchestration, result serialization.

pub mod bnn;
pub mod config;
pub mod data;
pub mod error;
pub mod linalg;
pub mod mcmc;
pub mod nlp;
pub mod pipeline;
pub mod report;
pub mod structural;
pub mod synth;

pub use error::{Error, Result};
