//! Forward models for the observed nodes of the stochastic heat equation.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::SpdeConfig;
use crate::rng::ChainRng;
use crate::{Error, Result};

/// Draws `u(T, ·)` at the observation points for given initial-field
/// coefficients.
pub trait ForwardSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// One noisy forward draw, written to `out` (cleared first).
    fn observe(&self, zeta: &[f64], rng: &mut ChainRng, out: &mut Vec<f64>);

    /// The noise-free forward map.
    fn mean_observation(&self, zeta: &[f64]) -> Vec<f64>;
}

/// Interior node positions `x_j = j/(J + 1)`, `j = 1..J`.
pub fn grid(config: &SpdeConfig) -> Vec<f64> {
    let dx = config.dx();
    (1..=config.j).map(|j| j as f64 * dx).collect()
}

/// `u⁰(x_j) = Σ_k ζ_k sin(kπ x_j)`.
pub fn initial_field(zeta: &[f64], config: &SpdeConfig) -> Vec<f64> {
    grid(config).iter().map(|x| kl_field(zeta, *x)).collect()
}

/// `Σ_k ζ_k sin(kπ x)`.
pub fn kl_field(zeta: &[f64], x: f64) -> f64 {
    zeta.iter()
        .enumerate()
        .map(|(k, z)| z * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
        .sum()
}

/// One explicit Euler step on the interior nodes with pinned zero boundary.
fn heat_step(u: &[f64], lambda: f64, out: &mut [f64]) {
    let n = u.len();
    for j in 0..n {
        let left = if j == 0 { 0.0 } else { u[j - 1] };
        let right = if j + 1 == n { 0.0 } else { u[j + 1] };
        out[j] = u[j] + lambda * (left - 2.0 * u[j] + right);
    }
}

/// Explicit Euler evolution of `∂_t u = Δu + σẆ` to the horizon, started
/// from the Karhunen–Loève field of `zeta`. Returns the interior nodes.
pub fn spde_forward(zeta: &[f64], config: &SpdeConfig, rng: &mut ChainRng) -> Result<Vec<f64>> {
    config.validate()?;
    Ok(evolve(zeta, config, config.sigma, rng))
}

fn evolve(zeta: &[f64], config: &SpdeConfig, sigma: f64, rng: &mut ChainRng) -> Vec<f64> {
    let (dt, steps) = config.time_step();
    let dx = config.dx();
    let lambda = dt / (dx * dx);
    let noise = sigma * (dt / dx).sqrt();
    let mut u = initial_field(zeta, config);
    let mut next = vec![0.0; u.len()];
    for _ in 0..steps {
        heat_step(&u, lambda, &mut next);
        if noise > 0.0 {
            for v in next.iter_mut() {
                let eta: f64 = StandardNormal.sample(rng);
                *v += noise * eta;
            }
        }
        std::mem::swap(&mut u, &mut next);
    }
    u
}

/// Linear interpolation of the interior field (with zero boundary values) at
/// the observation points, as an `N × J` matrix.
pub fn observation_matrix(config: &SpdeConfig) -> DMatrix<f64> {
    let j = config.j;
    let mut h = DMatrix::zeros(config.obs_points.len(), j);
    for (i, x) in config.obs_points.iter().enumerate() {
        let mut p = x * (j + 1) as f64;
        if (p - p.round()).abs() < 1e-9 {
            p = p.round();
        }
        let lo = (p.floor() as usize).min(j);
        let frac = p - lo as f64;
        // Grid index g ∈ 0..=J+1 maps to column g − 1; the boundary columns
        // do not exist.
        if lo >= 1 {
            h[(i, lo - 1)] += 1.0 - frac;
        }
        if lo < j && frac > 0.0 {
            h[(i, lo)] += frac;
        }
    }
    h
}

fn apply(h: &DMatrix<f64>, u: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        h.row_iter()
            .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()),
    );
}

/// Full-grid explicit Euler simulation.
pub struct ExplicitEuler {
    config: SpdeConfig,
    h: DMatrix<f64>,
}

impl ExplicitEuler {
    pub fn new(config: &SpdeConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            h: observation_matrix(config),
        })
    }
}

impl ForwardSolver for ExplicitEuler {
    fn name(&self) -> &'static str {
        "explicit-euler"
    }

    fn observe(&self, zeta: &[f64], rng: &mut ChainRng, out: &mut Vec<f64>) {
        let u = evolve(zeta, &self.config, self.config.sigma, rng);
        apply(&self.h, &u, out);
    }

    fn mean_observation(&self, zeta: &[f64]) -> Vec<f64> {
        let mut dummy = crate::rng::stream(0, &[]);
        let u = evolve(zeta, &self.config, 0.0, &mut dummy);
        let mut out = Vec::new();
        apply(&self.h, &u, &mut out);
        out
    }
}

/// Covariance of the explicit scheme's accumulated noise on the full grid:
/// `S ← A S Aᵀ + c² I` iterated once per time step from `S = 0`.
pub fn noise_covariance(config: &SpdeConfig) -> DMatrix<f64> {
    let (dt, steps) = config.time_step();
    let dx = config.dx();
    let lambda = dt / (dx * dx);
    let c2 = config.sigma * config.sigma * dt / dx;
    let n = config.j;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - 2.0 * lambda
        } else if i.abs_diff(j) == 1 {
            lambda
        } else {
            0.0
        }
    });
    let mut s = DMatrix::zeros(n, n);
    for _ in 0..steps {
        s = &a * &s * a.transpose();
        for i in 0..n {
            s[(i, i)] += c2;
        }
    }
    s
}

/// The same Gaussian law as [`ExplicitEuler`] at the observed points,
/// sampled directly: `H Aᴺ B ζ + L z` with `L Lᵀ = H S Hᵀ`.
pub struct ExactGaussian {
    mean_map: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl ExactGaussian {
    pub fn new(config: &SpdeConfig) -> Result<Self> {
        config.validate()?;
        let h = observation_matrix(config);
        let mut dummy = crate::rng::stream(0, &[]);
        let mut b = DMatrix::zeros(config.j, config.modes);
        for k in 0..config.modes {
            let mut e = vec![0.0; config.modes];
            e[k] = 1.0;
            let u = evolve(&e, config, 0.0, &mut dummy);
            b.set_column(k, &DVector::from_vec(u));
        }
        let mean_map = &h * b;
        let n = config.obs_points.len();
        let chol = if config.sigma > 0.0 {
            let cov = &h * noise_covariance(config) * h.transpose();
            let cov = (&cov + cov.transpose()) * 0.5;
            cov.cholesky()
                .ok_or_else(|| Error::Degenerate("observation covariance is singular".into()))?
                .l()
        } else {
            DMatrix::zeros(n, n)
        };
        Ok(Self { mean_map, chol })
    }
}

impl ForwardSolver for ExactGaussian {
    fn name(&self) -> &'static str {
        "exact-gaussian"
    }

    fn observe(&self, zeta: &[f64], rng: &mut ChainRng, out: &mut Vec<f64>) {
        let n = self.chol.nrows();
        let mut buf = [0.0f64; super::MAX_OBSERVATIONS];
        let z = &mut buf[..n];
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        out.clear();
        for i in 0..n {
            let mut acc = 0.0;
            for (k, zk) in zeta.iter().enumerate() {
                acc += self.mean_map[(i, k)] * zk;
            }
            for (l, zl) in z.iter().enumerate().take(i + 1) {
                acc += self.chol[(i, l)] * zl;
            }
            out.push(acc);
        }
    }

    fn mean_observation(&self, zeta: &[f64]) -> Vec<f64> {
        (0..self.mean_map.nrows())
            .map(|i| {
                zeta.iter()
                    .enumerate()
                    .map(|(k, z)| self.mean_map[(i, k)] * z)
                    .sum()
            })
            .collect()
    }
}

type Factory = fn(&SpdeConfig) -> Result<Arc<dyn ForwardSolver>>;

/// Forward solvers by name.
pub struct SolverRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl SolverRegistry {
    pub fn with_builtin() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("explicit-euler", |c| Ok(Arc::new(ExplicitEuler::new(c)?)));
        reg.register("exact-gaussian", |c| Ok(Arc::new(ExactGaussian::new(c)?)));
        reg
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn build(&self, name: &str, config: &SpdeConfig) -> Result<Arc<dyn ForwardSolver>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "forward solver",
                name: name.to_string(),
                available: self.names().join(", "),
            })?;
        factory(config)
    }
}
