//! Accept–reject kernels and chain runners.
//!
//! Every kernel has the accept–reject form: draw a proposal, accept it with
//! probability `α`, otherwise stay put. A [`StepOutcome`] records both the
//! proposal and the decision so that diagnostics can be computed from the
//! trajectory alone.

mod chain;
mod embedded;
mod mh;
mod pm;
mod poisson;
pub mod registry;

pub use chain::{run_chain, Trajectory, TrajectoryMeta};
pub use embedded::{embedded_m_acceptance, embedded_s_acceptance, EmbeddedM, EmbeddedS};
pub use mh::MarginalMh;
pub use pm::{pm_step, PseudoMarginal};
pub use poisson::{poisson_run, PoissonPath};
pub use registry::{KernelParams, KernelRegistry, KernelStrategy};

use crate::model::{ExtendedState, FiniteProposal, FiniteTarget, PMState};
use crate::rng::ChainRng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub state: S,
    pub accepted: bool,
    pub alpha: f64,
    pub proposed: S,
}

pub trait MarkovKernel: Send + Sync {
    type State: Clone + Send;

    fn step(&self, state: &Self::State, rng: &mut ChainRng) -> StepOutcome<Self::State>;

    /// Weight draws consumed per iteration.
    fn cost_units(&self) -> usize;

    fn name(&self) -> &'static str;
}

/// States that carry a point of the x-space.
pub trait HasPoint {
    type Point;
    fn point(&self) -> &Self::Point;
}

impl<X> HasPoint for PMState<X> {
    type Point = X;
    fn point(&self) -> &X {
        &self.x
    }
}

impl<X> HasPoint for ExtendedState<X> {
    type Point = X;
    fn point(&self) -> &X {
        &self.x
    }
}

impl HasPoint for usize {
    type Point = usize;
    fn point(&self) -> &usize {
        self
    }
}

impl HasPoint for Vec<f64> {
    type Point = Vec<f64>;
    fn point(&self) -> &Vec<f64> {
        self
    }
}

/// `1 ∧ {r · w'/w}` evaluated in log space. A zero proposed weight is always
/// rejected (this covers `0/0`); from a zero current weight any positive
/// proposal is accepted.
pub fn pm_acceptance(log_ratio: f64, weight: f64, proposed_weight: f64) -> f64 {
    if !(proposed_weight > 0.0) {
        return 0.0;
    }
    if !(weight > 0.0) {
        return 1.0;
    }
    let log_a = log_ratio + proposed_weight.ln() - weight.ln();
    if log_a >= 0.0 {
        1.0
    } else {
        log_a.exp()
    }
}

/// Metropolis–Hastings ratio `π(x') q(x', x) / {π(x) q(x, x')}` of a finite
/// target and proposal.
pub fn mh_ratio(
    target: &FiniteTarget,
    proposal: &FiniteProposal,
    x: usize,
    y: usize,
) -> Result<f64> {
    let pi = target.pi();
    let qxy = proposal.q(x, y);
    if qxy <= 0.0 {
        return Err(Error::UndefinedRatio(format!("q({x}, {y}) = 0")));
    }
    if pi[x] <= 0.0 {
        return Err(Error::UndefinedRatio(format!("π({x}) = 0")));
    }
    Ok(pi[y] * proposal.q(y, x) / (pi[x] * qxy))
}
