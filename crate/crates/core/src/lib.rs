//! Sparsity-promoting hierarchical Bayesian inversion.
//!
//! The unknown `x` has a conditionally Gaussian prior whose variances `θ`
//! follow a generalized gamma hyperprior. This crate provides
//!
//! - [`hypermodel`]: the hyperprior, the λ-update rules and hyperparameter
//!   matching between models with different shape exponent `r`,
//! - [`forward`]: the whitened linear forward model and the 1D
//!   deconvolution benchmark,
//! - [`ias`]: the iterative alternating sequential (IAS) MAP solver and its
//!   two-phase hybrid variant,
//! - [`sampler`]: the `(v, τ)` reparametrization that turns the posterior
//!   into a white-noise-dominated density, sampled with pCN or the
//!   radial-angular pCN kernel,
//! - [`diagnostics`]: autocorrelation, credible envelopes and
//!   δ-compressibility of posterior draws,
//! - [`experiment`]: the config-driven pipeline behind the `hierbayes` CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod hypermodel;
pub mod ias;
pub mod io;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use forward::{DeconvolutionConfig, GroundTruth, InverseProblem};
pub use hypermodel::Hypermodel;
pub use ias::{HybridSchedule, IasOptions, IasResult, IasState};
pub use sampler::{ChainConfig, KernelKind, ReparamPoint, SampleSet};
