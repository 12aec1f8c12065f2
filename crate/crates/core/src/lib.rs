//! Pseudo-marginal Metropolis–Hastings with averaged likelihood estimators.
//!
//! The crate is organised around five layers:
//!
//! * [`model`]: finite and continuous targets, proposals and exchangeable
//!   weight models, plus the JSON model-file format.
//! * [`kernels`]: the averaged pseudo-marginal kernel `P_r`, the marginal
//!   Metropolis–Hastings kernel, the extended-space kernels `P̄_s`/`P̄_m` and a
//!   unit-rate Poisson clock. Every kernel variant is also reachable by name
//!   through [`kernels::registry`].
//! * [`exact`]: dense transition matrices for finite models, stationary laws,
//!   Poisson-equation asymptotic variances, Dirichlet forms and spectra.
//! * [`estimate`]: batch-means variances, ESS and per-cost efficiencies.
//! * [`experiments`]: scripted studies (tightness counterexamples, random
//!   inequality sweeps, the stochastic heat equation inverse problem and the
//!   start-up cost study).

// NaN must fail validation, so negated comparisons are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod exact;
pub mod experiments;
pub mod kernels;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
