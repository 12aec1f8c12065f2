use std::sync::Arc;

use rand::Rng;

use super::{pm_acceptance, MarkovKernel, StepOutcome};
use crate::model::{PMState, PmModel};
use crate::rng::ChainRng;
use crate::Result;

/// Averaged pseudo-marginal kernel `P_r`: propose `x' ~ Q(x, ·)`, average `r`
/// fresh weights at `x'` and accept with `1 ∧ {r(x, x') w̄'/w̄}`.
///
/// Only the average `w̄` is kept in the state.
#[derive(Debug)]
pub struct PseudoMarginal<M> {
    model: Arc<M>,
    r: usize,
}

impl<M: PmModel> PseudoMarginal<M> {
    pub fn new(model: Arc<M>, r: usize) -> Result<Self> {
        model.check_count(r)?;
        Ok(Self { model, r })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// A fresh state at `x` with its own weight draw.
    pub fn init(&self, x: M::Point, rng: &mut ChainRng) -> PMState<M::Point> {
        let weight = self.model.draw_average(&x, self.r, rng);
        PMState::new(x, weight, self.r)
    }
}

impl<M: PmModel> MarkovKernel for PseudoMarginal<M> {
    type State = PMState<M::Point>;

    fn step(&self, state: &Self::State, rng: &mut ChainRng) -> StepOutcome<Self::State> {
        let y = self.model.propose(&state.x, rng);
        let w_new = self.model.draw_average(&y, self.r, rng);
        let log_ratio = self
            .model
            .log_mh_ratio(&state.x, &y)
            .unwrap_or(f64::NEG_INFINITY);
        let alpha = pm_acceptance(log_ratio, state.weight, w_new);
        let u: f64 = rng.random();
        let proposed = PMState::new(y, w_new, self.r);
        let accepted = u < alpha;
        StepOutcome {
            state: if accepted {
                proposed.clone()
            } else {
                state.clone()
            },
            accepted,
            alpha,
            proposed,
        }
    }

    fn cost_units(&self) -> usize {
        self.r
    }

    fn name(&self) -> &'static str {
        "pm"
    }
}

/// One step of `P_r` from `state`.
pub fn pm_step<M: PmModel>(
    state: &PMState<M::Point>,
    model: &Arc<M>,
    r: usize,
    rng: &mut ChainRng,
) -> Result<StepOutcome<PMState<M::Point>>> {
    Ok(PseudoMarginal::new(model.clone(), r)?.step(state, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomTable, FiniteModel, FiniteProposal, FiniteTarget, WeightModel};
    use crate::rng::stream;

    fn indep_counterexample() -> Arc<FiniteModel> {
        let target = FiniteTarget::from_masses(&[2.0, 1.0]).unwrap();
        let proposal = FiniteProposal::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let weights = WeightModel::IndependentFinite(vec![
            AtomTable::from_pairs(&[(1.0, 1.0)]).unwrap(),
            AtomTable::from_pairs(&[(0.0, 0.75), (4.0, 0.25)]).unwrap(),
        ]);
        Arc::new(FiniteModel::new(target, proposal, weights).unwrap())
    }

    #[test]
    fn flat_target_with_equal_weights_always_accepts() {
        let target = FiniteTarget::from_masses(&[1.0, 1.0, 1.0]).unwrap();
        let third = vec![1.0 / 3.0; 3];
        let proposal = FiniteProposal::from_matrix(&[third.clone(), third.clone(), third]).unwrap();
        let model = Arc::new(FiniteModel::new(target, proposal, WeightModel::unit(3)).unwrap());
        let mut rng = stream(2, &[]);
        let mut s = PMState::new(0, 1.0, 2);
        for _ in 0..100 {
            let out = pm_step(&s, &model, 2, &mut rng).unwrap();
            assert_eq!(out.alpha, 1.0);
            assert!(out.accepted);
            s = out.state;
        }
    }

    #[test]
    fn transition_frequencies_match_counterexample_matrix() {
        let model = indep_counterexample();
        let kernel = PseudoMarginal::new(model, 1).unwrap();
        let mut rng = stream(9, &[]);
        let n = 100_000;
        let from_light = PMState::new(0, 1.0, 1);
        let moved = (0..n)
            .filter(|_| {
                let out = kernel.step(&from_light, &mut rng);
                if out.proposed.weight == 4.0 {
                    assert_eq!(out.alpha, 1.0);
                } else {
                    assert_eq!(out.alpha, 0.0);
                }
                out.accepted
            })
            .count();
        let p = moved as f64 / n as f64;
        assert!((p - 0.25).abs() < 4.0 * (0.25 * 0.75 / n as f64).sqrt());

        let from_heavy = PMState::new(1, 4.0, 1);
        let out = kernel.step(&from_heavy, &mut rng);
        assert!((out.alpha - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejection_leaves_state_unchanged() {
        let model = indep_counterexample();
        let kernel = PseudoMarginal::new(model, 2).unwrap();
        let mut rng = stream(4, &[]);
        let mut s = PMState::new(0, 1.0, 2);
        for _ in 0..1000 {
            let out = kernel.step(&s, &mut rng);
            assert!((0.0..=1.0).contains(&out.alpha));
            if !out.accepted {
                assert_eq!(out.state, s);
            } else {
                assert_eq!(out.state, out.proposed);
            }
            s = out.state;
        }
    }

    #[test]
    fn zero_weight_start_accepts_first_positive_proposal() {
        let model = indep_counterexample();
        let kernel = PseudoMarginal::new(model, 1).unwrap();
        let mut rng = stream(6, &[]);
        let s = PMState::new(1, 0.0, 1);
        let out = kernel.step(&s, &mut rng);
        assert_eq!(out.proposed.weight, 1.0);
        assert_eq!(out.alpha, 1.0);
        assert!(out.accepted);
    }
}
