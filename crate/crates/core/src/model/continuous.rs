use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::PmModel;
use crate::rng::ChainRng;
use crate::{Error, Result};

type LogDensity = dyn Fn(&[f64]) -> f64 + Send + Sync;
type TransitionSampler = dyn Fn(&[f64], &mut ChainRng) -> Vec<f64> + Send + Sync;
type TransitionDensity = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type WeightSampler = dyn Fn(&[f64], &mut ChainRng) -> f64 + Send + Sync;

/// Target on `R^d` given by a log-density up to an additive constant.
#[derive(Clone)]
pub struct ContinuousTarget {
    dim: usize,
    log_density: Arc<LogDensity>,
}

impl ContinuousTarget {
    pub fn new(dim: usize, log_density: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            log_density: Arc::new(log_density),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        (self.log_density)(x)
    }
}

impl fmt::Debug for ContinuousTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousTarget")
            .field("dim", &self.dim)
            .finish()
    }
}

/// Proposal kernel given by a sampler and its log transition density
/// `ln q(x, y)`.
#[derive(Clone)]
pub struct ContinuousProposal {
    sampler: Arc<TransitionSampler>,
    log_density: Arc<TransitionDensity>,
}

impl ContinuousProposal {
    pub fn new(
        sampler: impl Fn(&[f64], &mut ChainRng) -> Vec<f64> + Send + Sync + 'static,
        log_density: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            sampler: Arc::new(sampler),
            log_density: Arc::new(log_density),
        }
    }

    /// Isotropic Gaussian random walk `y = x + scale·Z`.
    pub fn gaussian_random_walk(scale: f64) -> Self {
        let norm =
            move |d: usize| -0.5 * d as f64 * (2.0 * std::f64::consts::PI * scale * scale).ln();
        Self::new(
            move |x, rng| {
                x.iter()
                    .map(|xi| {
                        let z: f64 = StandardNormal.sample(rng);
                        xi + scale * z
                    })
                    .collect()
            },
            move |x, y| {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                norm(x.len()) - 0.5 * sq / (scale * scale)
            },
        )
    }

    pub fn sample(&self, x: &[f64], rng: &mut ChainRng) -> Vec<f64> {
        (self.sampler)(x, rng)
    }

    pub fn log_density(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.log_density)(x, y)
    }
}

impl fmt::Debug for ContinuousProposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ContinuousProposal")
    }
}

/// Independent weights `W_i ≥ 0` with `E[W] = 1`, drawn per point.
#[derive(Clone)]
pub struct ContinuousWeights {
    sampler: Arc<WeightSampler>,
    zero_has_mass: bool,
}

impl ContinuousWeights {
    /// `zero_has_mass` declares whether `W = 0` occurs with positive
    /// probability.
    pub fn new(
        zero_has_mass: bool,
        sampler: impl Fn(&[f64], &mut ChainRng) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            sampler: Arc::new(sampler),
            zero_has_mass,
        }
    }

    /// `W = exp(σZ − σ²/2)`, the log-normal weight with unit mean.
    pub fn log_normal(sigma: f64) -> Self {
        Self::new(false, move |_, rng| {
            let z: f64 = StandardNormal.sample(rng);
            (sigma * z - 0.5 * sigma * sigma).exp()
        })
    }

    pub fn zero_has_mass(&self) -> bool {
        self.zero_has_mass
    }

    /// One weight draw. Negative draws violate the model contract and abort.
    pub fn sample(&self, x: &[f64], rng: &mut ChainRng) -> f64 {
        let w = (self.sampler)(x, rng);
        assert!(w >= 0.0, "weight sampler returned negative value {w}");
        w
    }
}

impl fmt::Debug for ContinuousWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuousWeights")
            .field("zero_has_mass", &self.zero_has_mass)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ContinuousModel {
    pub target: ContinuousTarget,
    pub proposal: ContinuousProposal,
    pub weights: ContinuousWeights,
}

impl ContinuousModel {
    pub fn new(
        target: ContinuousTarget,
        proposal: ContinuousProposal,
        weights: ContinuousWeights,
    ) -> Self {
        Self {
            target,
            proposal,
            weights,
        }
    }
}

impl PmModel for ContinuousModel {
    type Point = Vec<f64>;

    fn propose(&self, x: &Vec<f64>, rng: &mut ChainRng) -> Vec<f64> {
        self.proposal.sample(x, rng)
    }

    fn log_mh_ratio(&self, x: &Vec<f64>, y: &Vec<f64>) -> Result<f64> {
        let fwd = self.proposal.log_density(x, y);
        if fwd == f64::NEG_INFINITY {
            return Err(Error::UndefinedRatio("q(x, y) = 0".into()));
        }
        let lx = self.target.log_density(x);
        if !lx.is_finite() {
            return Err(Error::UndefinedRatio("π(x) = 0".into()));
        }
        Ok(self.target.log_density(y) + self.proposal.log_density(y, x) - lx - fwd)
    }

    fn check_count(&self, r: usize) -> Result<()> {
        if r == 0 {
            return Err(Error::UnsupportedCount { r, len: 0 });
        }
        Ok(())
    }

    fn draw_weights(&self, x: &Vec<f64>, r: usize, rng: &mut ChainRng, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..r).map(|_| self.weights.sample(x, rng)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn log_normal_weights_have_unit_mean() {
        let w = ContinuousWeights::log_normal(0.5);
        let mut rng = stream(11, &[]);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| w.sample(&[], &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() < 4.0 * (var / n as f64).sqrt());
        assert!(!w.zero_has_mass());
    }

    #[test]
    fn random_walk_density_matches_sampler_moments() {
        let q = ContinuousProposal::gaussian_random_walk(0.7);
        let mut rng = stream(12, &[]);
        let x = [1.0, -2.0];
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let y = q.sample(&x, &mut rng);
            for d in 0..2 {
                sum[d] += y[d] - x[d];
                sq[d] += (y[d] - x[d]).powi(2);
            }
        }
        for d in 0..2 {
            let mean = sum[d] / n as f64;
            let var = sq[d] / n as f64 - mean * mean;
            assert!(mean.abs() < 4.0 * 0.7 / (n as f64).sqrt());
            assert!((var - 0.49).abs() < 4.0 * 0.49 * (2.0 / n as f64).sqrt());
        }
        // Density integrates to one along a line through a 1-d grid.
        let q1 = ContinuousProposal::gaussian_random_walk(0.7);
        let h = 1e-3;
        let mass: f64 = (-8000..8000)
            .map(|i| q1.log_density(&[0.0], &[i as f64 * h]).exp() * h)
            .sum();
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    #[should_panic(expected = "negative")]
    fn negative_weights_abort() {
        let w = ContinuousWeights::new(false, |_, _| -1.0);
        w.sample(&[], &mut stream(1, &[]));
    }

    #[test]
    fn symmetric_walk_ratio_is_target_ratio() {
        let model = ContinuousModel::new(
            ContinuousTarget::new(1, |x| -0.5 * x[0] * x[0]),
            ContinuousProposal::gaussian_random_walk(1.0),
            ContinuousWeights::log_normal(0.1),
        );
        let lr = model.log_mh_ratio(&vec![0.0], &vec![1.0]).unwrap();
        assert!((lr + 0.5).abs() < 1e-12);
    }
}
