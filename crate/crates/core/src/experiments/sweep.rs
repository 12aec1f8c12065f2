//! Random finite instances and the exact inequality checks run on them.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimate::{batch_means_default, sample_variance};
use crate::exact::{
    asym_var_spectral, build_pm_matrix, dirichlet_form, is_positive, mean_acceptance_exact,
    Fundamental, KernelMatrix, DEFAULT_STATE_CAP,
};
use crate::kernels::{KernelParams, KernelRegistry};
use crate::model::{
    AtomTable, FiniteModel, FiniteProposal, FiniteTarget, ModelFile, TupleSet, WeightModel,
};
use crate::rng::{stream, ChainRng};
use crate::{Error, Result};

/// Slack below which an inequality counts as violated.
pub const SLACK_TOL: f64 = 1e-9;
/// Largest tolerated `|σ̃² − Var_π − var|`.
pub const IDENTITY_TOL: f64 = 1e-10;
pub const FUNCTIONS_PER_INSTANCE: usize = 20;
const MAX_ATTEMPTS: u64 = 100;

const TAG_INSTANCE: u64 = 1;
const TAG_CONSISTENCY: u64 = 2;
const TAG_POISSON: u64 = 3;

/// A random finite model with its estimator pair `s < m` and test functions
/// of `x`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub index: usize,
    pub model: Arc<FiniteModel>,
    pub s: usize,
    pub m: usize,
    pub phis: Vec<Vec<f64>>,
}

/// `n` positive numbers from a flat Dirichlet draw.
fn simplex(n: usize, rng: &mut ChainRng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v: f64| v / total).collect()
}

/// Atom values in `(0, 1)`, the smallest replaced by 0 half the time.
fn raw_atoms(n: usize, rng: &mut ChainRng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    if rng.random_bool(0.5) {
        v[0] = 0.0;
    }
    v
}

fn random_weights(
    nx: usize,
    m: usize,
    exchangeable: bool,
    rng: &mut ChainRng,
) -> Result<WeightModel> {
    if exchangeable {
        let sets = (0..nx)
            .map(|_| {
                let atoms = raw_atoms(rng.random_range(2..=3), rng);
                let mut base: Vec<f64> = (0..m).map(|i| atoms[i % atoms.len()]).collect();
                base.shuffle(rng);
                let mean = base.iter().sum::<f64>() / m as f64;
                let base: Vec<f64> = base.iter().map(|w| w / mean).collect();
                TupleSet::from_values(&permutations(&base))
            })
            .collect::<Result<_>>()?;
        Ok(WeightModel::ExchangeableFinite(sets))
    } else {
        let tables = (0..nx)
            .map(|_| {
                let k = rng.random_range(2..=3);
                let w = raw_atoms(k, rng);
                // Probabilities at least 1/(2k) keep the weights moderate.
                let p: Vec<f64> = simplex(k, rng)
                    .into_iter()
                    .map(|v| 0.5 * v + 0.5 / k as f64)
                    .collect();
                let mean: f64 = w.iter().zip(&p).map(|(a, b)| a * b).sum();
                let pairs: Vec<(f64, f64)> = w.iter().map(|v| v / mean).zip(p).collect();
                AtomTable::from_pairs(&pairs)
            })
            .collect::<Result<_>>()?;
        Ok(WeightModel::IndependentFinite(tables))
    }
}

fn permutations(base: &[f64]) -> Vec<Vec<f64>> {
    if base.len() <= 1 {
        return vec![base.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..base.len() {
        let mut rest = base.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn random_model(rng: &mut ChainRng, m: usize) -> Result<FiniteModel> {
    let nx = rng.random_range(2..=3);
    let target = FiniteTarget::from_masses(&simplex(nx, rng))?;
    let q: Vec<Vec<f64>> = (0..nx)
        .map(|_| {
            let row: Vec<f64> = (0..nx).map(|_| rng.random_range(0.05..1.0)).collect();
            let t: f64 = row.iter().sum();
            row.into_iter().map(|v| v / t).collect()
        })
        .collect();
    let proposal = FiniteProposal::from_matrix(&q)?;
    let exchangeable = rng.random_bool(0.5);
    let weights = random_weights(nx, m, exchangeable, rng)?;
    FiniteModel::new(target, proposal, weights)
}

fn usable(model: &FiniteModel, s: usize, m: usize) -> bool {
    [s, m].iter().all(|&r| {
        build_pm_matrix(model, r, DEFAULT_STATE_CAP)
            .and_then(|k| {
                let pi = k.pi()?;
                Fundamental::new(&k, &pi).map(|_| ())
            })
            .is_ok()
    })
}

/// Instance `index` of the sweep seeded by `seed`. Candidates whose kernels
/// are reducible or numerically singular are redrawn, at most 100 times.
pub fn generate_instance(seed: u64, index: usize) -> Result<Instance> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream(seed, &[TAG_INSTANCE, index as u64, attempt]);
        let m = rng.random_range(2..=4);
        let s = rng.random_range(1..m);
        let model = random_model(&mut rng, m)?;
        if !usable(&model, s, m) {
            continue;
        }
        let nx = model.num_states();
        let phis = (0..FUNCTIONS_PER_INSTANCE)
            .map(|_| (0..nx).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        return Ok(Instance {
            index,
            model: Arc::new(model),
            s,
            m,
            phis,
        });
    }
    Err(Error::Degenerate(format!(
        "no usable instance {index} after {MAX_ATTEMPTS} attempts"
    )))
}

pub fn generate_instances(seed: u64, count: usize) -> Result<Vec<Instance>> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_instance(seed, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionResult {
    pub instance: usize,
    pub s: usize,
    pub m: usize,
    pub phi: usize,
    pub var_pi: f64,
    pub var_s: f64,
    pub var_m: f64,
    pub cont_s: f64,
    pub cont_m: f64,
    pub dirichlet_s: f64,
    pub dirichlet_m: f64,
    /// `m{var_m + Var_π} − s{var_s + Var_π}`.
    pub slack_thm1: f64,
    /// `(2m/s − 1) var_m − var_s`, only when `P_m` is positive.
    pub slack_cor2: Option<f64>,
    /// `m σ̃²_m − s σ̃²_s`.
    pub slack_prop2: f64,
    pub alpha_ratio: f64,
    /// Largest `|σ̃² − Var_π − var|` over both kernels.
    pub identity_defect: f64,
    /// Largest gap between the Poisson-equation and eigen-expansion variances.
    pub spectral_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAnalysis {
    pub instance: usize,
    pub weights: String,
    pub num_x: usize,
    pub s: usize,
    pub m: usize,
    pub states_s: usize,
    pub states_m: usize,
    pub alpha_s: f64,
    pub alpha_m: f64,
    /// `(m/s) ᾱ_s − ᾱ_m`.
    pub slack_alpha: f64,
    pub positive_m: bool,
    pub min_eigenvalue_m: f64,
    pub functions: Vec<FunctionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_s: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_m: Option<Vec<Vec<f64>>>,
}

impl InstanceAnalysis {
    /// Inequality violations and identity failures in this record.
    pub fn violations(&self) -> usize {
        let mut n = usize::from(self.slack_alpha < -SLACK_TOL);
        for f in &self.functions {
            n += usize::from(f.slack_thm1 < -SLACK_TOL);
            n += usize::from(f.slack_cor2.is_some_and(|c| c < -SLACK_TOL));
            n += usize::from(f.slack_prop2 < -SLACK_TOL);
            n += usize::from(f.identity_defect > IDENTITY_TOL);
        }
        n
    }
}

fn matrix_rows(k: &KernelMatrix) -> Vec<Vec<f64>> {
    k.p()
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

/// Exact comparison of `P_s` and `P_m` on `model` for every function in
/// `phis`. Either kernel may have at most `cap` states.
pub fn analyze_model(
    index: usize,
    model: &FiniteModel,
    s: usize,
    m: usize,
    phis: &[Vec<f64>],
    include_matrices: bool,
    cap: usize,
) -> Result<InstanceAnalysis> {
    if s == 0 || s > m {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= s <= m, got s = {s}, m = {m}"
        )));
    }
    let ks = build_pm_matrix(model, s, cap)?;
    let km = build_pm_matrix(model, m, cap)?;
    let pi_s = ks.pi()?;
    let pi_m = km.pi()?;
    let fs = Fundamental::new(&ks, &pi_s)?;
    let fm = Fundamental::new(&km, &pi_m)?;
    let spectrum = is_positive(&km, &pi_m)?;
    let alpha_s = mean_acceptance_exact(model, s)?;
    let alpha_m = mean_acceptance_exact(model, m)?;
    let (sf, mf) = (s as f64, m as f64);
    let functions = phis
        .iter()
        .enumerate()
        .map(|(j, phi)| {
            let (ps, pm) = (ks.lift(phi), km.lift(phi));
            let var_pi = fs.var_pi(&ps);
            let var_s = fs.asym_var(&ps)?;
            let var_m = fm.asym_var(&pm)?;
            let cont_s = fs.cont_var(&ps)?;
            let cont_m = fm.cont_var(&pm)?;
            let identity_defect = (cont_s - var_pi - var_s)
                .abs()
                .max((cont_m - fm.var_pi(&pm) - var_m).abs());
            let spectral_defect = (asym_var_spectral(&ks, &pi_s, &ps)? - var_s)
                .abs()
                .max((asym_var_spectral(&km, &pi_m, &pm)? - var_m).abs());
            Ok(FunctionResult {
                instance: index,
                s,
                m,
                phi: j + 1,
                var_pi,
                var_s,
                var_m,
                cont_s,
                cont_m,
                dirichlet_s: dirichlet_form(&ks, &pi_s, &ps),
                dirichlet_m: dirichlet_form(&km, &pi_m, &pm),
                slack_thm1: mf * (var_m + var_pi) - sf * (var_s + var_pi),
                slack_cor2: spectrum
                    .positive
                    .then(|| (2.0 * mf / sf - 1.0) * var_m - var_s),
                slack_prop2: mf * cont_m - sf * cont_s,
                alpha_ratio: alpha_m / alpha_s,
                identity_defect,
                spectral_defect,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InstanceAnalysis {
        instance: index,
        weights: model.weights.kind().to_string(),
        num_x: model.num_states(),
        s,
        m,
        states_s: ks.len(),
        states_m: km.len(),
        alpha_s,
        alpha_m,
        slack_alpha: mf / sf * alpha_s - alpha_m,
        positive_m: spectrum.positive,
        min_eigenvalue_m: spectrum.min_eigenvalue,
        functions,
        model: include_matrices.then(|| ModelFile::from_model(model)),
        matrix_s: include_matrices.then(|| matrix_rows(&ks)),
        matrix_m: include_matrices.then(|| matrix_rows(&km)),
    })
}

pub fn analyze_instance(instance: &Instance, include_matrices: bool) -> Result<InstanceAnalysis> {
    analyze_model(
        instance.index,
        &instance.model,
        instance.s,
        instance.m,
        &instance.phis,
        include_matrices,
        DEFAULT_STATE_CAP,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub instances: Vec<InstanceAnalysis>,
}

impl SweepReport {
    pub fn violations(&self) -> usize {
        self.instances
            .iter()
            .map(InstanceAnalysis::violations)
            .sum()
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionResult> {
        self.instances.iter().flat_map(|i| i.functions.iter())
    }
}

/// Exact checks on `count` random instances; results are ordered by
/// instance index whatever the thread count.
pub fn sweep_theorem(count: usize, seed: u64, include_matrices: bool) -> Result<SweepReport> {
    if count == 0 {
        return Err(Error::InvalidConfig(
            "sweep needs at least one instance".into(),
        ));
    }
    let instances = (0..count)
        .into_par_iter()
        .map(|i| analyze_instance(&generate_instance(seed, i)?, include_matrices))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { seed, instances })
}

/// Batch-means estimate against the exact asymptotic variance of `P_s`, for
/// the first test function of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub instance: usize,
    pub r: usize,
    pub exact: f64,
    pub estimate: f64,
    pub se: f64,
    pub within: bool,
}

pub fn consistency_check(
    instance: &Instance,
    n: usize,
    seed: u64,
    within_se: f64,
) -> Result<ConsistencyRow> {
    let r = instance.s;
    let k = build_pm_matrix(&instance.model, r, DEFAULT_STATE_CAP)?;
    let pi = k.pi()?;
    let phi = &instance.phis[0];
    let exact = Fundamental::new(&k, &pi)?.asym_var(&k.lift(phi))?;
    let strategy = KernelRegistry::global().get("pm")?;
    let mut rng = stream(seed, &[TAG_CONSISTENCY, instance.index as u64]);
    let traj = strategy.simulate(
        &instance.model,
        &KernelParams::averaged(r),
        n,
        std::slice::from_ref(phi),
        &mut rng,
    )?;
    let bm = batch_means_default(&traj.phi[0])?;
    Ok(ConsistencyRow {
        instance: instance.index,
        r,
        exact,
        estimate: bm.var,
        se: bm.se,
        within: (bm.var - exact).abs() <= within_se * bm.se,
    })
}

/// Replicated Poissonized runs of `P_s` against the exact time-average
/// variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub instance: usize,
    pub r: usize,
    pub horizon: f64,
    pub replicates: usize,
    pub exact: f64,
    /// `T` times the replicate variance of the time averages.
    pub estimate: f64,
    pub se: f64,
}

impl PoissonCheck {
    pub fn within(&self, k: f64) -> bool {
        (self.estimate - self.exact).abs() <= k * self.se
    }
}

pub fn poisson_check(
    instance: &Instance,
    replicates: usize,
    horizon: f64,
    seed: u64,
) -> Result<PoissonCheck> {
    if replicates < 3 {
        return Err(Error::InsufficientData(format!("{replicates} replicates")));
    }
    let r = instance.s;
    let k = build_pm_matrix(&instance.model, r, DEFAULT_STATE_CAP)?;
    let pi = k.pi()?;
    let phi = &instance.phis[0];
    let exact = Fundamental::new(&k, &pi)?.cont_var(&k.lift(phi))?;
    let strategy = KernelRegistry::global().get("pm")?;
    let params = KernelParams::averaged(r);
    let averages = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, &[TAG_POISSON, instance.index as u64, rep as u64]);
            strategy
                .poisson_averages(
                    &instance.model,
                    &params,
                    horizon,
                    std::slice::from_ref(phi),
                    &mut rng,
                )
                .map(|v| v[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    let estimate = horizon * sample_variance(&averages);
    Ok(PoissonCheck {
        instance: instance.index,
        r,
        horizon,
        replicates,
        exact,
        estimate,
        se: estimate * (2.0 / (replicates as f64 - 1.0)).sqrt(),
    })
}
