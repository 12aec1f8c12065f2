//! Exact analysis of finite-state kernels.
//!
//! Kernel matrices are dense and row-stochastic over the support of the
//! extended target (null states such as `w̄ = 0` are pruned). Asymptotic
//! variances come from the Poisson equation `(I − P) g = φ − π(φ)`, solved on
//! the π-mean-zero subspace through `I − P + 1πᵀ`.

mod acceptance;
mod build;
mod matrix;
mod pf;
mod spectral;
mod variance;

pub use acceptance::mean_acceptance_exact;
pub use build::{
    build_embedded_matrix, build_mh_matrix, build_pm_matrix, EmbeddedKind, DEFAULT_STATE_CAP,
};
pub use matrix::{stationary_distribution, KernelMatrix, StateKey};
pub use pf::pf_relative_variance;
pub use spectral::{asym_var_spectral, dirichlet_form, is_positive, Spectrum};
pub use variance::{
    asym_var_exact, cont_var_exact, solve_poisson, variance_report, Fundamental, VarianceReport,
};
