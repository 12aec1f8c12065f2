//! Kernels on the extended space `X × W^m × [m]`.
//!
//! Both kernels target `π̄(x, w, k) = π(x) q_x(w) A(w, k) / m` and propose
//! `(x', w')` from `q(x, ·) q_{x'}(·)`. They differ only in how `k'` is drawn:
//! `P̄_s` draws it uniformly and accepts on the ratio of `s`-windows, `P̄_m`
//! draws it with probability proportional to `A(w', k')` and accepts on the
//! ratio of full sums.

use std::sync::Arc;

use rand::Rng;

use super::{pm_acceptance, MarkovKernel, StepOutcome};
use crate::model::{window_average, ExtendedState, PmModel};
use crate::rng::ChainRng;
use crate::{Error, Result};

fn check_pair<M: PmModel>(model: &M, s: usize, m: usize) -> Result<()> {
    if s == 0 || s > m {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= s <= m, got s = {s}, m = {m}"
        )));
    }
    model.check_count(m)
}

#[derive(Debug)]
pub struct EmbeddedS<M> {
    model: Arc<M>,
    s: usize,
    m: usize,
}

impl<M: PmModel> EmbeddedS<M> {
    pub fn new(model: Arc<M>, s: usize, m: usize) -> Result<Self> {
        check_pair(model.as_ref(), s, m)?;
        Ok(Self { model, s, m })
    }

    /// A fresh state at `x`: weights drawn from `q_x`, `k` uniform on `[m]`.
    pub fn init(&self, x: M::Point, rng: &mut ChainRng) -> ExtendedState<M::Point> {
        let mut w = Vec::with_capacity(self.m);
        self.model.draw_weights(&x, self.m, rng, &mut w);
        let k = rng.random_range(1..=self.m);
        ExtendedState::new(x, w, k)
    }
}

impl<M: PmModel> MarkovKernel for EmbeddedS<M> {
    type State = ExtendedState<M::Point>;

    fn step(&self, state: &Self::State, rng: &mut ChainRng) -> StepOutcome<Self::State> {
        let y = self.model.propose(&state.x, rng);
        let mut w = Vec::with_capacity(self.m);
        self.model.draw_weights(&y, self.m, rng, &mut w);
        let k = rng.random_range(1..=self.m);
        let log_ratio = self
            .model
            .log_mh_ratio(&state.x, &y)
            .unwrap_or(f64::NEG_INFINITY);
        let current = window_average(&state.w, state.k, self.s);
        let proposed_window = window_average(&w, k, self.s);
        let alpha = pm_acceptance(log_ratio, current, proposed_window);
        let u: f64 = rng.random();
        let proposed = ExtendedState::new(y, w, k);
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
        self.m
    }

    fn name(&self) -> &'static str {
        "embedded-s"
    }
}

#[derive(Debug)]
pub struct EmbeddedM<M> {
    model: Arc<M>,
    s: usize,
    m: usize,
}

impl<M: PmModel> EmbeddedM<M> {
    pub fn new(model: Arc<M>, s: usize, m: usize) -> Result<Self> {
        check_pair(model.as_ref(), s, m)?;
        Ok(Self { model, s, m })
    }

    /// A fresh state at `x`: weights from `q_x`, `k` drawn with probability
    /// proportional to `A(w, k)` (uniform when all weights vanish).
    pub fn init(&self, x: M::Point, rng: &mut ChainRng) -> ExtendedState<M::Point> {
        let mut w = Vec::with_capacity(self.m);
        self.model.draw_weights(&x, self.m, rng, &mut w);
        let k = draw_window(&w, self.s, rng);
        ExtendedState::new(x, w, k)
    }
}

/// `k ∈ [m]` with `P(k) ∝ A(w, k)`; consumes exactly one uniform. Falls back
/// to `k` uniform when `w = 0`.
fn draw_window(w: &[f64], s: usize, rng: &mut ChainRng) -> usize {
    let m = w.len();
    let total: f64 = w.iter().sum();
    let u: f64 = rng.random();
    if !(total > 0.0) {
        return ((u * m as f64) as usize).min(m - 1) + 1;
    }
    let mut acc = 0.0;
    let target = u * total;
    for k in 1..=m {
        acc += window_average(w, k, s);
        if target < acc {
            return k;
        }
    }
    // Rounding can leave `target` marginally above the accumulated total.
    (1..=m)
        .rev()
        .find(|&k| window_average(w, k, s) > 0.0)
        .unwrap_or(m)
}

impl<M: PmModel> MarkovKernel for EmbeddedM<M> {
    type State = ExtendedState<M::Point>;

    fn step(&self, state: &Self::State, rng: &mut ChainRng) -> StepOutcome<Self::State> {
        let y = self.model.propose(&state.x, rng);
        let mut w = Vec::with_capacity(self.m);
        self.model.draw_weights(&y, self.m, rng, &mut w);
        let k = draw_window(&w, self.s, rng);
        let log_ratio = self
            .model
            .log_mh_ratio(&state.x, &y)
            .unwrap_or(f64::NEG_INFINITY);
        let current: f64 = state.w.iter().sum();
        let proposed_total: f64 = w.iter().sum();
        let alpha = pm_acceptance(log_ratio, current, proposed_total);
        let u: f64 = rng.random();
        let proposed = ExtendedState::new(y, w, k);
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
        self.m
    }

    fn name(&self) -> &'static str {
        "embedded-m"
    }
}

/// Acceptance probability of `P̄_s` for an explicit proposal.
pub fn embedded_s_acceptance(
    ratio: f64,
    state: &ExtendedState<usize>,
    proposed_w: &[f64],
    proposed_k: usize,
    s: usize,
) -> f64 {
    pm_acceptance(
        ratio.ln(),
        window_average(&state.w, state.k, s),
        window_average(proposed_w, proposed_k, s),
    )
}

/// Acceptance probability of `P̄_m` for an explicit proposal.
pub fn embedded_m_acceptance(ratio: f64, state: &ExtendedState<usize>, proposed_w: &[f64]) -> f64 {
    pm_acceptance(ratio.ln(), state.w.iter().sum(), proposed_w.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FiniteModel, FiniteProposal, FiniteTarget, TupleSet, WeightModel};
    use crate::rng::stream;

    fn flat_antithetic() -> Arc<FiniteModel> {
        let target = FiniteTarget::from_masses(&[1.0, 1.0]).unwrap();
        let proposal = FiniteProposal::from_matrix(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let set = TupleSet::from_values(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let weights = WeightModel::ExchangeableFinite(vec![set.clone(), set]);
        Arc::new(FiniteModel::new(target, proposal, weights).unwrap())
    }

    #[test]
    fn window_ratio_acceptance_example() {
        let state = ExtendedState::new(0, vec![0.0, 2.0], 2);
        assert_eq!(embedded_s_acceptance(1.0, &state, &[2.0, 0.0], 1, 1), 1.0);
        assert_eq!(embedded_s_acceptance(1.0, &state, &[2.0, 0.0], 2, 1), 0.0);
        let ones = ExtendedState::new(0, vec![1.0; 3], 1);
        assert_eq!(embedded_m_acceptance(1.0, &ones, &[1.0; 3]), 1.0);
    }

    #[test]
    fn full_window_reduces_to_pm_acceptance() {
        let state = ExtendedState::new(0, vec![0.5, 1.5, 1.0], 2);
        let w = [3.0, 0.0, 0.3];
        for k in 1..=3 {
            let a = embedded_s_acceptance(0.7, &state, &w, k, 3);
            let b = pm_acceptance(0.7f64.ln(), 1.0, 3.3 / 3.0);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn k_is_drawn_proportional_to_window_average() {
        let mut rng = stream(8, &[]);
        for _ in 0..1000 {
            assert_eq!(draw_window(&[0.0, 2.0], 1, &mut rng), 2);
        }
        let n = 60_000;
        let mut hits = [0usize; 3];
        for _ in 0..n {
            hits[draw_window(&[1.0, 1.0, 1.0], 3, &mut rng) - 1] += 1;
        }
        for h in hits {
            let f = h as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn embedded_steps_never_enter_null_windows() {
        let model = flat_antithetic();
        let ks = EmbeddedS::new(model.clone(), 1, 2).unwrap();
        let km = EmbeddedM::new(model, 1, 2).unwrap();
        let mut rng = stream(10, &[]);
        let mut a = ExtendedState::new(0, vec![0.0, 2.0], 2);
        let mut b = a.clone();
        for _ in 0..2000 {
            let out = ks.step(&a, &mut rng);
            if out.proposed.w[out.proposed.k - 1] == 0.0 {
                assert_eq!(out.alpha, 0.0);
            }
            a = out.state;
            assert_eq!(a.w[a.k - 1], 2.0);
            let out = km.step(&b, &mut rng);
            assert_eq!(out.alpha, 1.0);
            b = out.state;
            assert_eq!(b.w[b.k - 1], 2.0);
        }
    }

    #[test]
    fn rejects_bad_pairs() {
        let model = flat_antithetic();
        assert!(EmbeddedS::new(model.clone(), 3, 2).is_err());
        assert!(EmbeddedM::new(model.clone(), 0, 2).is_err());
        assert!(EmbeddedM::new(model, 1, 3).is_err());
    }
}
