//! Targets, proposals and exchangeable weight models.

mod config;
mod continuous;
mod finite;
mod scalar;

pub use config::{model_hash, ModelFile, PhiConfig, ProposalConfig, TargetConfig, WeightsConfig};
pub use continuous::{ContinuousModel, ContinuousProposal, ContinuousTarget, ContinuousWeights};
pub use finite::{AtomTable, FiniteModel, FiniteProposal, FiniteTarget, TupleSet, WeightModel};
pub use scalar::Scalar;

use crate::rng::ChainRng;
use crate::Result;

/// Everything a pseudo-marginal kernel needs from a model: a proposal on the
/// x-space, the Metropolis–Hastings ratio of the exact target, and a source
/// of exchangeable nonnegative weights with unit mean.
///
/// Random numbers are consumed in a fixed order by the kernels: first the
/// proposed point, then its weights, then the accept/reject uniform.
pub trait PmModel: Send + Sync {
    type Point: Clone + Send + Sync + std::fmt::Debug + PartialEq;

    fn propose(&self, x: &Self::Point, rng: &mut ChainRng) -> Self::Point;

    /// `ln r(x, y)`; `-inf` when the reverse move is impossible.
    fn log_mh_ratio(&self, x: &Self::Point, y: &Self::Point) -> Result<f64>;

    /// Whether `r` weights per iteration can be drawn.
    fn check_count(&self, r: usize) -> Result<()>;

    fn draw_weights(&self, x: &Self::Point, r: usize, rng: &mut ChainRng, out: &mut Vec<f64>);

    fn draw_average(&self, x: &Self::Point, r: usize, rng: &mut ChainRng) -> f64 {
        let mut buf = Vec::with_capacity(r);
        self.draw_weights(x, r, rng, &mut buf);
        buf.iter().sum::<f64>() / r as f64
    }
}

/// State of the averaged kernel `P_r`: the point and the average of the `r`
/// weights that were accepted with it.
#[derive(Debug, Clone, PartialEq)]
pub struct PMState<X> {
    pub x: X,
    pub weight: f64,
    pub r: usize,
}

impl<X> PMState<X> {
    pub fn new(x: X, weight: f64, r: usize) -> Self {
        debug_assert!(weight >= 0.0);
        Self { x, weight, r }
    }
}

/// State `(x, w, k)` of the extended-space kernels, with `k` 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState<X> {
    pub x: X,
    pub w: Vec<f64>,
    pub k: usize,
}

impl<X> ExtendedState<X> {
    pub fn new(x: X, w: Vec<f64>, k: usize) -> Self {
        debug_assert!(k >= 1 && k <= w.len());
        Self { x, w, k }
    }

    pub fn m(&self) -> usize {
        self.w.len()
    }
}

/// Wrap a 1-based index into `[1, m]`: `((i - 1) mod m) + 1`.
#[inline]
pub fn wrap_index(i: usize, m: usize) -> usize {
    ((i - 1) % m) + 1
}

/// `A(w, k) = (w_k + ... + w_{k+s-1}) / s` with indices taken modulo `m`.
///
/// Panics if `k` is outside `[1, m]` or `s` outside `[1, m]`.
pub fn window_average(w: &[f64], k: usize, s: usize) -> f64 {
    let m = w.len();
    assert!((1..=m).contains(&k), "window start {k} outside [1, {m}]");
    assert!((1..=m).contains(&s), "window length {s} outside [1, {m}]");
    (0..s).map(|j| w[wrap_index(k + j, m) - 1]).sum::<f64>() / s as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_average_examples() {
        assert_eq!(window_average(&[1.0, 1.0, 1.0, 1.0], 3, 2), 1.0);
        assert_eq!(window_average(&[0.0, 2.0], 2, 1), 2.0);
        assert_eq!(window_average(&[1.0, 2.0, 3.0], 3, 2), 2.0);
    }

    #[test]
    #[should_panic]
    fn window_average_rejects_zero_start() {
        window_average(&[1.0, 2.0], 0, 1);
    }

    proptest! {
        #[test]
        fn window_averages_sum_to_total(w in prop::collection::vec(0.0f64..10.0, 1..7), s_frac in 0.0f64..1.0) {
            let m = w.len();
            let s = 1 + ((s_frac * m as f64) as usize).min(m - 1);
            let total: f64 = w.iter().sum();
            let windows: f64 = (1..=m).map(|k| window_average(&w, k, s)).sum();
            prop_assert!((windows - total).abs() < 1e-12 * (1.0 + total));
        }
    }
}
