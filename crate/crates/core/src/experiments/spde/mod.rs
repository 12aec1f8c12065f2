//! Inverse problem for the initial condition of the stochastic heat equation
//! `∂_t u = Δu + σẆ` on `(0, 1)` with zero Dirichlet boundary.
//!
//! The initial field carries the truncated Karhunen–Loève prior
//! `u(0, x) = Σ_{k ≤ M} ζ_k sin(kπx)`, `ζ_k ~ N(0, k⁻²)`. Data are noisy
//! point values of `u(T, ·)`; each weight is the Gaussian observation density
//! of one forward draw, so averaging `m` of them estimates the likelihood
//! without bias.

mod solver;

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimate::{ess_and_cost, mean, min_efficiency, replicate_ci, CostModel, EfficiencyRow};
use crate::kernels::{run_chain, PseudoMarginal};
use crate::model::{PMState, PmModel};
use crate::rng::{stream, ChainRng};
use crate::{Error, Result};

pub use solver::{
    grid, initial_field, kl_field, noise_covariance, observation_matrix, spde_forward,
    ExactGaussian, ExplicitEuler, ForwardSolver, SolverRegistry,
};

pub const MAX_OBSERVATIONS: usize = 64;
/// Efficiency is the minimum over `u(0, i/10)`, `i = 1..9`.
pub const EFFICIENCY_POINTS: usize = 9;

const TAG_DATA: u64 = 10;
const TAG_PILOT: u64 = 11;
const TAG_CHAIN: u64 = 12;
const PILOT_STEPS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpdeConfig {
    /// Interior grid nodes; `Δx = 1/(J + 1)`.
    pub j: usize,
    /// Largest allowed time step; defaults to `Δx²/4`. The step actually
    /// used divides the horizon evenly.
    pub dt: Option<f64>,
    pub horizon: f64,
    pub sigma: f64,
    /// Karhunen–Loève modes `M`.
    pub modes: usize,
    pub obs_points: Vec<f64>,
    pub obs_sd: f64,
    /// Crank–Nicolson correlation; calibrated by a pilot when absent.
    pub rho: Option<f64>,
    pub m_list: Vec<usize>,
    pub iterations: usize,
    pub replicates: usize,
    /// Fraction of each chain discarded as burn-in.
    pub burn_in: f64,
    pub pilot_iterations: usize,
    pub pilot_m: usize,
    pub target_accept: f64,
    /// Forward solver used inside the chains.
    pub solver: String,
    /// Forward solver used to simulate the data.
    pub data_solver: String,
}

impl Default for SpdeConfig {
    fn default() -> Self {
        Self {
            j: 50,
            dt: None,
            horizon: 2e-2,
            sigma: 0.2,
            modes: 10,
            obs_points: (1..=9).map(|i| i as f64 / 10.0).collect(),
            obs_sd: 0.3,
            rho: None,
            m_list: vec![1, 2, 3, 5, 10],
            iterations: 200_000,
            replicates: 5,
            burn_in: 0.1,
            pilot_iterations: 10_000,
            pilot_m: 64,
            target_accept: 0.5,
            solver: "exact-gaussian".into(),
            data_solver: "explicit-euler".into(),
        }
    }
}

impl SpdeConfig {
    pub fn dx(&self) -> f64 {
        1.0 / (self.j + 1) as f64
    }

    /// `(Δt, steps)` with `steps · Δt = T`.
    pub fn time_step(&self) -> (f64, usize) {
        let dx = self.dx();
        let max = self.dt.unwrap_or(dx * dx / 4.0);
        let steps = (self.horizon / max).ceil().max(1.0) as usize;
        (self.horizon / steps as f64, steps)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.j < 1 {
            return bad("need at least one grid node".into());
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        let dx = self.dx();
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("time step {dt} must be positive"));
            }
        }
        let (dt, _) = self.time_step();
        if dt > dx * dx / 2.0 {
            return bad(format!(
                "explicit scheme unstable: dt = {dt} > dx^2/2 = {}",
                dx * dx / 2.0
            ));
        }
        if !(self.sigma >= 0.0) {
            return bad(format!("noise scale {} must be nonnegative", self.sigma));
        }
        if self.modes < 1 {
            return bad("need at least one mode".into());
        }
        if self.obs_points.is_empty() || self.obs_points.len() > MAX_OBSERVATIONS {
            return bad(format!(
                "between 1 and {MAX_OBSERVATIONS} observations needed"
            ));
        }
        if self.obs_points.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            return bad("observation points must lie in (0, 1)".into());
        }
        if !(self.obs_sd > 0.0) {
            return bad(format!("observation SD {} must be positive", self.obs_sd));
        }
        if let Some(rho) = self.rho {
            if !(rho.abs() < 1.0) {
                return bad(format!("|rho| = {} must be below 1", rho.abs()));
            }
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return bad("m list must be nonempty and positive".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn-in fraction {}", self.burn_in));
        }
        if self.pilot_m == 0 || !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("pilot needs m >= 1 and a target acceptance in (0, 1)".into());
        }
        Ok(())
    }
}

/// `ζ_k ~ N(0, k⁻²)`.
pub fn prior_draw(modes: usize, rng: &mut ChainRng) -> Vec<f64> {
    (1..=modes)
        .map(|k| {
            let z: f64 = StandardNormal.sample(rng);
            z / k as f64
        })
        .collect()
}

/// `ζ' = ρζ + √(1 − ρ²) ξ` with `ξ` a prior draw.
pub fn crank_nicolson_propose(zeta: &[f64], rho: f64, rng: &mut ChainRng) -> Vec<f64> {
    let c = (1.0 - rho * rho).sqrt();
    let xi = prior_draw(zeta.len(), rng);
    zeta.iter().zip(xi).map(|(z, x)| rho * z + c * x).collect()
}

/// `−½ Σ ((y_i − u_i)/σ_ξ)²`.
fn log_density(obs: &[f64], data: &[f64], sd: f64) -> f64 {
    -0.5 * obs
        .iter()
        .zip(data)
        .map(|(u, y)| ((y - u) / sd).powi(2))
        .sum::<f64>()
}

/// One forward draw's weight `exp{−½ Σ ((y_i − u(T, x_i))/σ_ξ)² − shift}`.
pub fn spde_weight(
    solver: &dyn ForwardSolver,
    zeta: &[f64],
    data: &[f64],
    obs_sd: f64,
    shift: f64,
    rng: &mut ChainRng,
) -> f64 {
    let mut obs = Vec::with_capacity(data.len());
    solver.observe(zeta, rng, &mut obs);
    (log_density(&obs, data, obs_sd) - shift).exp()
}

/// The pseudo-marginal model on the KL coefficients: Crank–Nicolson
/// proposal, and weights from independent forward draws.
pub struct SpdeProblem {
    solver: Arc<dyn ForwardSolver>,
    data: Vec<f64>,
    obs_sd: f64,
    rho: f64,
    shift: f64,
}

impl SpdeProblem {
    /// `shift` is the log-density of the noise-free forward map at `anchor`.
    pub fn new(
        solver: Arc<dyn ForwardSolver>,
        data: Vec<f64>,
        obs_sd: f64,
        rho: f64,
        anchor: &[f64],
    ) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "|rho| = {} must be below 1",
                rho.abs()
            )));
        }
        let shift = log_density(&solver.mean_observation(anchor), &data, obs_sd);
        Ok(Self {
            solver,
            data,
            obs_sd,
            rho,
            shift,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl PmModel for SpdeProblem {
    type Point = Vec<f64>;

    fn propose(&self, x: &Vec<f64>, rng: &mut ChainRng) -> Vec<f64> {
        crank_nicolson_propose(x, self.rho, rng)
    }

    /// The proposal is prior-reversible, so only weights enter the ratio.
    fn log_mh_ratio(&self, _: &Vec<f64>, _: &Vec<f64>) -> Result<f64> {
        Ok(0.0)
    }

    fn check_count(&self, r: usize) -> Result<()> {
        if r == 0 {
            return Err(Error::InvalidConfig(
                "need at least one forward draw".into(),
            ));
        }
        Ok(())
    }

    fn draw_weights(&self, x: &Vec<f64>, r: usize, rng: &mut ChainRng, out: &mut Vec<f64>) {
        out.clear();
        for _ in 0..r {
            out.push(spde_weight(
                self.solver.as_ref(),
                x,
                &self.data,
                self.obs_sd,
                self.shift,
                rng,
            ));
        }
    }
}

/// Truth and data for a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdeData {
    pub truth: Vec<f64>,
    pub y: Vec<f64>,
}

/// `ζ*` from the prior and `y_i = u(T, x_i) + ξ_i` from one forward run.
pub fn simulate_data(config: &SpdeConfig, seed: u64) -> Result<SpdeData> {
    config.validate()?;
    let solver = SolverRegistry::with_builtin().build(&config.data_solver, config)?;
    let mut rng = stream(seed, &[TAG_DATA]);
    let truth = prior_draw(config.modes, &mut rng);
    let mut y = Vec::new();
    solver.observe(&truth, &mut rng, &mut y);
    for v in &mut y {
        let xi: f64 = StandardNormal.sample(&mut rng);
        *v += config.obs_sd * xi;
    }
    Ok(SpdeData { truth, y })
}

/// Values of `u(0, i/10)`, `i = 1..9`, as functions of the coefficients.
fn efficiency_functions() -> Vec<Box<dyn Fn(&PMState<Vec<f64>>) -> f64 + Send + Sync>> {
    (1..=EFFICIENCY_POINTS)
        .map(|i| {
            let x = i as f64 / 10.0;
            Box::new(move |s: &PMState<Vec<f64>>| kl_field(&s.x, x))
                as Box<dyn Fn(&PMState<Vec<f64>>) -> f64 + Send + Sync>
        })
        .collect()
}

fn chain(
    solver: &Arc<dyn ForwardSolver>,
    data: &SpdeData,
    config: &SpdeConfig,
    rho: f64,
    m: usize,
    n: usize,
    rng: &mut ChainRng,
) -> Result<crate::kernels::Trajectory> {
    let problem = Arc::new(SpdeProblem::new(
        solver.clone(),
        data.y.clone(),
        config.obs_sd,
        rho,
        &data.truth,
    )?);
    let kernel = PseudoMarginal::new(problem, m)?;
    let x0 = kernel.init(data.truth.clone(), rng);
    let fs = efficiency_functions();
    let refs: Vec<&dyn Fn(&PMState<Vec<f64>>) -> f64> = fs
        .iter()
        .map(|f| f.as_ref() as &dyn Fn(&PMState<Vec<f64>>) -> f64)
        .collect();
    Ok(run_chain(&kernel, x0, n, &refs, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotStep {
    pub rho: f64,
    pub accept_rate: f64,
}

/// Bisection on `ln(1 − ρ)` over `[ln 10⁻⁸, 0]` for the pilot acceptance
/// rate at `pilot_m` draws.
pub fn calibrate_rho(
    solver: &Arc<dyn ForwardSolver>,
    data: &SpdeData,
    config: &SpdeConfig,
    seed: u64,
) -> Result<(f64, Vec<PilotStep>)> {
    let (mut lo, mut hi) = ((1e-8f64).ln(), 0.0f64);
    let mut steps = Vec::with_capacity(PILOT_STEPS);
    for it in 0..PILOT_STEPS {
        let t = 0.5 * (lo + hi);
        let rho = 1.0 - t.exp();
        let mut rng = stream(seed, &[TAG_PILOT, it as u64]);
        let traj = chain(
            solver,
            data,
            config,
            rho,
            config.pilot_m,
            config.pilot_iterations,
            &mut rng,
        )?;
        let accept_rate = traj.acceptance_rate();
        steps.push(PilotStep { rho, accept_rate });
        // Larger steps (larger 1 − ρ) lower the acceptance rate.
        if accept_rate > config.target_accept {
            lo = t;
        } else {
            hi = t;
        }
    }
    Ok((1.0 - (0.5 * (lo + hi)).exp(), steps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdeReplicate {
    pub m: usize,
    pub replicate: usize,
    pub ess_star: f64,
    pub ess: f64,
    pub accept_rate: f64,
    /// Test function attaining the minimum.
    pub phi: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdeReport {
    pub config: SpdeConfig,
    pub rho: f64,
    pub pilot: Vec<PilotStep>,
    pub data: SpdeData,
    pub replicates: Vec<SpdeReplicate>,
    pub rows: Vec<EfficiencyRow>,
}

impl SpdeReport {
    /// Point estimates of `ESS*` strictly decrease along `m_list`.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].ess_star > w[1].ess_star)
    }

    /// The interval of the first `m` lies strictly above that of the last.
    pub fn first_above_last(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => a.ci_lo > b.ci_hi,
            _ => false,
        }
    }
}

pub fn run_spde_study(config: &SpdeConfig, seed: u64) -> Result<SpdeReport> {
    config.validate()?;
    let data = simulate_data(config, seed)?;
    let solver = SolverRegistry::with_builtin().build(&config.solver, config)?;
    let (rho, pilot) = match config.rho {
        Some(r) => (r, Vec::new()),
        None => calibrate_rho(&solver, &data, config, seed)?,
    };
    let burn = (config.iterations as f64 * config.burn_in).floor() as usize;
    let jobs: Vec<(usize, usize)> = config
        .m_list
        .iter()
        .flat_map(|&m| (0..config.replicates).map(move |r| (m, r)))
        .collect();
    let replicates = jobs
        .par_iter()
        .map(|&(m, rep)| {
            let mut rng = stream(seed, &[TAG_CHAIN, m as u64, rep as u64]);
            let mut traj = chain(&solver, &data, config, rho, m, config.iterations, &mut rng)?;
            traj.discard(burn);
            let records = (0..EFFICIENCY_POINTS)
                .map(|j| {
                    ess_and_cost(
                        &traj,
                        j,
                        &format!("u0_{}", j + 1),
                        None,
                        CostModel::default(),
                        m,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let worst = min_efficiency(&records).expect("nine records");
            Ok(SpdeReplicate {
                m,
                replicate: rep,
                ess_star: worst.ess_star,
                ess: worst.ess,
                accept_rate: traj.acceptance_rate(),
                phi: worst.phi.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(config.m_list.len());
    for (g, &m) in config.m_list.iter().enumerate() {
        let reps = &replicates[g * config.replicates..(g + 1) * config.replicates];
        let stars: Vec<f64> = reps.iter().map(|r| r.ess_star).collect();
        let ci = replicate_ci(&stars, 0.90)?;
        rows.push(EfficiencyRow {
            m,
            phi: "min".into(),
            ess: mean(&reps.iter().map(|r| r.ess).collect::<Vec<_>>()),
            ess_star: ci.mean,
            emp_eff: ci.mean,
            accept_rate: mean(&reps.iter().map(|r| r.accept_rate).collect::<Vec<_>>()),
            ci_lo: ci.lo,
            ci_hi: ci.hi,
            replicates: config.replicates,
        });
    }
    Ok(SpdeReport {
        config: config.clone(),
        rho,
        pilot,
        data,
        replicates,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let c = SpdeConfig::default();
        c.validate().unwrap();
        let (dt, steps) = c.time_step();
        assert!(dt <= c.dx().powi(2) / 4.0);
        assert!((dt * steps as f64 - c.horizon).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for c in [
            SpdeConfig {
                dt: Some(1e-3),
                ..Default::default()
            },
            SpdeConfig {
                rho: Some(1.0),
                ..Default::default()
            },
            SpdeConfig {
                obs_points: vec![1.5],
                ..Default::default()
            },
            SpdeConfig {
                horizon: 0.0,
                ..Default::default()
            },
            SpdeConfig {
                modes: 0,
                ..Default::default()
            },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn crank_nicolson_limits() {
        let zeta = vec![0.3; 10];
        let mut a = stream(1, &[]);
        let mut b = stream(1, &[]);
        assert_eq!(
            crank_nicolson_propose(&zeta, 0.0, &mut a),
            prior_draw(10, &mut b)
        );
        let near = crank_nicolson_propose(&zeta, 1.0 - 1e-12, &mut a);
        for (x, y) in near.iter().zip(&zeta) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn noise_free_weights_are_deterministic() {
        let config = SpdeConfig {
            sigma: 0.0,
            ..Default::default()
        };
        let data = simulate_data(&config, 3).unwrap();
        let solver = SolverRegistry::with_builtin()
            .build("explicit-euler", &config)
            .unwrap();
        let mut rng = stream(4, &[]);
        let zeta = prior_draw(config.modes, &mut rng);
        let w1 = spde_weight(
            solver.as_ref(),
            &zeta,
            &data.y,
            config.obs_sd,
            0.0,
            &mut rng,
        );
        let w2 = spde_weight(
            solver.as_ref(),
            &zeta,
            &data.y,
            config.obs_sd,
            0.0,
            &mut rng,
        );
        assert_eq!(w1, w2);
    }

    #[test]
    fn flat_likelihood_for_huge_observation_noise() {
        let config = SpdeConfig::default();
        let data = simulate_data(&config, 3).unwrap();
        let solver = SolverRegistry::with_builtin()
            .build("exact-gaussian", &config)
            .unwrap();
        let mut rng = stream(5, &[]);
        for _ in 0..10 {
            let zeta = prior_draw(config.modes, &mut rng);
            let w = spde_weight(solver.as_ref(), &zeta, &data.y, 1e8, 0.0, &mut rng);
            assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_study_runs() {
        let config = SpdeConfig {
            m_list: vec![1, 4],
            iterations: 3_000,
            replicates: 3,
            pilot_iterations: 500,
            pilot_m: 8,
            ..Default::default()
        };
        let report = run_spde_study(&config, 7).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rho > 0.0 && report.rho < 1.0);
        assert_eq!(report.pilot.len(), PILOT_STEPS);
    }
}
