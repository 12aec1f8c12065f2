//! Name-indexed kernel strategies over finite models.
//!
//! Each strategy knows how to enumerate its exact transition matrix and how
//! to simulate itself from a stationary start, so studies can pick kernels
//! by name at runtime.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use rand::Rng;

use super::{
    poisson_run, run_chain, EmbeddedM, EmbeddedS, MarginalMh, MarkovKernel, PseudoMarginal,
    Trajectory,
};
use crate::exact::{
    build_embedded_matrix, build_mh_matrix, build_pm_matrix, EmbeddedKind, KernelMatrix,
};
use crate::model::{window_average, ExtendedState, FiniteModel, PMState};
use crate::rng::ChainRng;
use crate::{Error, Result};

/// Estimator counts: `r` for the averaged kernel, `(s, m)` for embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelParams {
    pub r: usize,
    pub s: usize,
    pub m: usize,
}

impl KernelParams {
    pub fn averaged(r: usize) -> Self {
        Self { r, s: r, m: r }
    }

    pub fn embedded(s: usize, m: usize) -> Self {
        Self { r: m, s, m }
    }
}

pub trait KernelStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn cost_units(&self, params: &KernelParams) -> usize;

    fn exact_matrix(
        &self,
        model: &FiniteModel,
        params: &KernelParams,
        cap: usize,
    ) -> Result<KernelMatrix>;

    /// `n` iterations from a draw of the stationary law, recording each
    /// function of `x` in `phis`.
    fn simulate(
        &self,
        model: &Arc<FiniteModel>,
        params: &KernelParams,
        n: usize,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Trajectory>;

    /// Time averages of `phis` along the Poissonized chain on `[0, horizon]`,
    /// started at stationarity.
    fn poisson_averages(
        &self,
        model: &Arc<FiniteModel>,
        params: &KernelParams,
        horizon: f64,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Vec<f64>>;
}

fn sample_index(probs: impl Iterator<Item = f64>, total: f64, rng: &mut ChainRng) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn stationary_x(model: &FiniteModel, rng: &mut ChainRng) -> usize {
    let pi = model.target.pi();
    sample_index(pi.iter().copied(), 1.0, rng)
}

/// `(x, w̄)` from `π(x) P_x(W̄ = w̄) w̄`.
fn stationary_pm(model: &FiniteModel, r: usize, rng: &mut ChainRng) -> Result<PMState<usize>> {
    let x = stationary_x(model, rng);
    let law = model.weights.average_law(x, r)?;
    let total: f64 = law.iter().map(|(w, p)| w * p).sum();
    let i = sample_index(law.iter().map(|(w, p)| w * p), total, rng);
    Ok(PMState::new(x, law[i].0, r))
}

/// `(x, w, k)` from `π(x) q_x(w) A(w, k) / m`.
fn stationary_extended(
    model: &FiniteModel,
    s: usize,
    m: usize,
    rng: &mut ChainRng,
) -> Result<ExtendedState<usize>> {
    let x = stationary_x(model, rng);
    let law = model.weights.joint_law(x, m)?;
    let sums: Vec<f64> = law.iter().map(|(w, p)| p * w.iter().sum::<f64>()).collect();
    let total: f64 = sums.iter().sum();
    let i = sample_index(sums.iter().copied(), total, rng);
    let w = law[i].0.clone();
    let windows: Vec<f64> = (1..=m).map(|k| window_average(&w, k, s)).collect();
    let wt: f64 = windows.iter().sum();
    let k = sample_index(windows.iter().copied(), wt, rng) + 1;
    Ok(ExtendedState::new(x, w, k))
}

fn record<K, X>(
    kernel: &K,
    x0: K::State,
    n: usize,
    phis: &[Vec<f64>],
    point: X,
    rng: &mut ChainRng,
) -> Trajectory
where
    K: MarkovKernel,
    X: Fn(&K::State) -> usize + Copy,
{
    let fs: Vec<Box<dyn Fn(&K::State) -> f64 + '_>> = phis
        .iter()
        .map(|phi| Box::new(move |s: &K::State| phi[point(s)]) as Box<dyn Fn(&K::State) -> f64>)
        .collect();
    let refs: Vec<&dyn Fn(&K::State) -> f64> = fs.iter().map(|f| f.as_ref()).collect();
    run_chain(kernel, x0, n, &refs, rng)
}

fn poisson_record<K, X>(
    kernel: &K,
    x0: K::State,
    horizon: f64,
    phis: &[Vec<f64>],
    point: X,
    rng: &mut ChainRng,
) -> Vec<f64>
where
    K: MarkovKernel,
    X: Fn(&K::State) -> usize + Copy,
{
    let path = poisson_run(kernel, x0, horizon, rng);
    phis.iter()
        .map(|phi| path.time_average(|s| phi[point(s)]))
        .collect()
}

struct MhStrategy;
struct PmStrategy;
struct EmbeddedStrategy(EmbeddedKind);

impl KernelStrategy for MhStrategy {
    fn name(&self) -> &'static str {
        "mh"
    }

    fn description(&self) -> &'static str {
        "marginal Metropolis–Hastings with the exact target"
    }

    fn cost_units(&self, _: &KernelParams) -> usize {
        0
    }

    fn exact_matrix(
        &self,
        model: &FiniteModel,
        _: &KernelParams,
        _: usize,
    ) -> Result<KernelMatrix> {
        build_mh_matrix(model)
    }

    fn simulate(
        &self,
        model: &Arc<FiniteModel>,
        _: &KernelParams,
        n: usize,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Trajectory> {
        let kernel = MarginalMh::new(model.clone());
        let x0 = stationary_x(model, rng);
        Ok(record(&kernel, x0, n, phis, |x: &usize| *x, rng))
    }

    fn poisson_averages(
        &self,
        model: &Arc<FiniteModel>,
        _: &KernelParams,
        horizon: f64,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Vec<f64>> {
        let kernel = MarginalMh::new(model.clone());
        let x0 = stationary_x(model, rng);
        Ok(poisson_record(
            &kernel,
            x0,
            horizon,
            phis,
            |x: &usize| *x,
            rng,
        ))
    }
}

impl KernelStrategy for PmStrategy {
    fn name(&self) -> &'static str {
        "pm"
    }

    fn description(&self) -> &'static str {
        "pseudo-marginal kernel with the average of r weights"
    }

    fn cost_units(&self, params: &KernelParams) -> usize {
        params.r
    }

    fn exact_matrix(
        &self,
        model: &FiniteModel,
        p: &KernelParams,
        cap: usize,
    ) -> Result<KernelMatrix> {
        build_pm_matrix(model, p.r, cap)
    }

    fn simulate(
        &self,
        model: &Arc<FiniteModel>,
        p: &KernelParams,
        n: usize,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Trajectory> {
        let kernel = PseudoMarginal::new(model.clone(), p.r)?;
        let x0 = stationary_pm(model, p.r, rng)?;
        Ok(record(&kernel, x0, n, phis, |s: &PMState<usize>| s.x, rng))
    }

    fn poisson_averages(
        &self,
        model: &Arc<FiniteModel>,
        p: &KernelParams,
        horizon: f64,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Vec<f64>> {
        let kernel = PseudoMarginal::new(model.clone(), p.r)?;
        let x0 = stationary_pm(model, p.r, rng)?;
        Ok(poisson_record(
            &kernel,
            x0,
            horizon,
            phis,
            |s: &PMState<usize>| s.x,
            rng,
        ))
    }
}

impl KernelStrategy for EmbeddedStrategy {
    fn name(&self) -> &'static str {
        match self.0 {
            EmbeddedKind::S => "embedded-s",
            EmbeddedKind::M => "embedded-m",
        }
    }

    fn description(&self) -> &'static str {
        match self.0 {
            EmbeddedKind::S => "extended-space kernel accepting on s-window averages",
            EmbeddedKind::M => "extended-space kernel accepting on the full m-sum",
        }
    }

    fn cost_units(&self, params: &KernelParams) -> usize {
        params.m
    }

    fn exact_matrix(
        &self,
        model: &FiniteModel,
        p: &KernelParams,
        cap: usize,
    ) -> Result<KernelMatrix> {
        build_embedded_matrix(model, p.s, p.m, self.0, cap)
    }

    fn simulate(
        &self,
        model: &Arc<FiniteModel>,
        p: &KernelParams,
        n: usize,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Trajectory> {
        let x0 = stationary_extended(model, p.s, p.m, rng)?;
        let point = |s: &ExtendedState<usize>| s.x;
        Ok(match self.0 {
            EmbeddedKind::S => record(
                &EmbeddedS::new(model.clone(), p.s, p.m)?,
                x0,
                n,
                phis,
                point,
                rng,
            ),
            EmbeddedKind::M => record(
                &EmbeddedM::new(model.clone(), p.s, p.m)?,
                x0,
                n,
                phis,
                point,
                rng,
            ),
        })
    }

    fn poisson_averages(
        &self,
        model: &Arc<FiniteModel>,
        p: &KernelParams,
        horizon: f64,
        phis: &[Vec<f64>],
        rng: &mut ChainRng,
    ) -> Result<Vec<f64>> {
        let x0 = stationary_extended(model, p.s, p.m, rng)?;
        let point = |s: &ExtendedState<usize>| s.x;
        Ok(match self.0 {
            EmbeddedKind::S => poisson_record(
                &EmbeddedS::new(model.clone(), p.s, p.m)?,
                x0,
                horizon,
                phis,
                point,
                rng,
            ),
            EmbeddedKind::M => poisson_record(
                &EmbeddedM::new(model.clone(), p.s, p.m)?,
                x0,
                horizon,
                phis,
                point,
                rng,
            ),
        })
    }
}

#[derive(Default)]
pub struct KernelRegistry {
    strategies: BTreeMap<&'static str, Arc<dyn KernelStrategy>>,
}

impl KernelRegistry {
    pub fn with_builtin() -> Self {
        let mut reg = Self::default();
        reg.register(Arc::new(MhStrategy));
        reg.register(Arc::new(PmStrategy));
        reg.register(Arc::new(EmbeddedStrategy(EmbeddedKind::S)));
        reg.register(Arc::new(EmbeddedStrategy(EmbeddedKind::M)));
        reg
    }

    /// Adds or replaces the strategy under its own name.
    pub fn register(&mut self, strategy: Arc<dyn KernelStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn KernelStrategy>> {
        self.strategies
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "kernel",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }

    /// The shared registry of built-in kernels.
    pub fn global() -> &'static KernelRegistry {
        static REGISTRY: OnceLock<KernelRegistry> = OnceLock::new();
        REGISTRY.get_or_init(KernelRegistry::with_builtin)
    }
}
