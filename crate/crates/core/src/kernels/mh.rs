use std::sync::Arc;

use rand::Rng;

use super::{MarkovKernel, StepOutcome};
use crate::model::PmModel;
use crate::rng::ChainRng;

/// The idealised kernel `P_MH` that evaluates the target exactly.
#[derive(Debug)]
pub struct MarginalMh<M> {
    model: Arc<M>,
}

impl<M: PmModel> MarginalMh<M> {
    pub fn new(model: Arc<M>) -> Self {
        Self { model }
    }
}

impl<M: PmModel> MarkovKernel for MarginalMh<M> {
    type State = M::Point;

    fn step(&self, x: &M::Point, rng: &mut ChainRng) -> StepOutcome<M::Point> {
        let y = self.model.propose(x, rng);
        let log_ratio = self.model.log_mh_ratio(x, &y).unwrap_or(f64::NEG_INFINITY);
        let alpha = if log_ratio >= 0.0 {
            1.0
        } else {
            log_ratio.exp()
        };
        let u: f64 = rng.random();
        let accepted = u < alpha;
        StepOutcome {
            state: if accepted { y.clone() } else { x.clone() },
            accepted,
            alpha,
            proposed: y,
        }
    }

    fn cost_units(&self) -> usize {
        0
    }

    fn name(&self) -> &'static str {
        "mh"
    }
}
