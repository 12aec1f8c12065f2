//! Efficiency per unit cost when each iteration pays a fixed start-up cost
//! on top of the weight draws.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimate::{ess_and_cost, mean, replicate_ci, CostModel, EfficiencyRow};
use crate::exact::{build_pm_matrix, Fundamental, DEFAULT_STATE_CAP};
use crate::kernels::{KernelParams, KernelRegistry};
use crate::model::{AtomTable, FiniteModel, FiniteProposal, FiniteTarget, WeightModel};
use crate::rng::stream;
use crate::{Error, Result};

pub const DEFAULT_GRID: [usize; 10] = [1, 2, 5, 10, 20, 50, 100, 200, 400, 1000];
const TAG_COST: u64 = 4;
/// `φ(x) = 1{x = 2}` on the two-point base model.
const PHI: [f64; 2] = [0.0, 1.0];
const VAR_PI: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostStudyConfig {
    pub cost: CostModel,
    pub m_grid: Vec<usize>,
    /// Iterations per replicate.
    pub iterations: usize,
    pub replicates: usize,
    /// `Var(W)` of a single weight.
    pub rel_var: f64,
    /// Also solve the exact asymptotic variance for each `m`.
    pub exact: bool,
}

impl Default for CostStudyConfig {
    fn default() -> Self {
        Self {
            cost: CostModel { c0: 200.0, c1: 1.0 },
            m_grid: DEFAULT_GRID.to_vec(),
            iterations: 200_000,
            replicates: 5,
            rel_var: 1.0,
            exact: false,
        }
    }
}

/// Uniform target on two points, deterministic swap proposal, weights
/// `W ∈ {0, 1 + v}` with `P(W = 1 + v) = 1/(1 + v)` so that `Var(W) = v`.
pub fn base_model(rel_var: f64) -> Result<FiniteModel> {
    if !(rel_var > 0.0) {
        return Err(Error::InvalidConfig(format!("relative variance {rel_var}")));
    }
    let top = 1.0 + rel_var;
    let table = AtomTable::from_pairs(&[(0.0, 1.0 - 1.0 / top), (top, 1.0 / top)])?;
    FiniteModel::new(
        FiniteTarget::from_masses(&[1.0, 1.0])?,
        FiniteProposal::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]])?,
        WeightModel::IndependentFinite(vec![table.clone(), table]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    #[serde(flatten)]
    pub row: EfficiencyRow,
    /// `Var_π / {var(φ, P_m) (c₀ + c₁ m)}` when requested.
    pub exact_eff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStudyReport {
    pub config: CostStudyConfig,
    pub rows: Vec<CostRow>,
    pub argmax_m: usize,
    pub exact_argmax_m: Option<usize>,
}

fn argmax(rows: &[CostRow], key: impl Fn(&CostRow) -> Option<f64>) -> Option<usize> {
    rows.iter()
        .filter_map(|r| key(r).map(|v| (r.row.m, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| m)
}

pub fn run_cost_study(config: &CostStudyConfig, seed: u64) -> Result<CostStudyReport> {
    let cost = CostModel::new(config.cost.c0, config.cost.c1)?;
    if config.m_grid.is_empty() || config.m_grid.contains(&0) {
        return Err(Error::InvalidConfig(
            "m grid must be nonempty and positive".into(),
        ));
    }
    let model = Arc::new(base_model(config.rel_var)?);
    let strategy = KernelRegistry::global().get("pm")?;
    let jobs: Vec<(usize, usize)> = config
        .m_grid
        .iter()
        .flat_map(|&m| (0..config.replicates).map(move |rep| (m, rep)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(m, rep)| {
            let mut rng = stream(seed, &[TAG_COST, m as u64, rep as u64]);
            let traj = strategy.simulate(
                &model,
                &KernelParams::averaged(m),
                config.iterations,
                &[PHI.to_vec()],
                &mut rng,
            )?;
            ess_and_cost(&traj, 0, "x", Some(VAR_PI), cost, m)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(config.m_grid.len());
    for (g, &m) in config.m_grid.iter().enumerate() {
        let reps = &records[g * config.replicates..(g + 1) * config.replicates];
        let effs: Vec<f64> = reps.iter().map(|r| r.emp_eff).collect();
        let ci = replicate_ci(&effs, 0.90)?;
        let exact_eff = if config.exact {
            let k = build_pm_matrix(&model, m, DEFAULT_STATE_CAP)?;
            let pi = k.pi()?;
            let var = Fundamental::new(&k, &pi)?.asym_var(&k.lift(&PHI))?;
            Some(VAR_PI / (var * cost.per_iteration(m)))
        } else {
            None
        };
        rows.push(CostRow {
            row: EfficiencyRow {
                m,
                phi: "x".into(),
                ess: mean(&reps.iter().map(|r| r.ess).collect::<Vec<_>>()),
                ess_star: mean(&reps.iter().map(|r| r.ess_star).collect::<Vec<_>>()),
                emp_eff: ci.mean,
                accept_rate: mean(&reps.iter().map(|r| r.accept_rate).collect::<Vec<_>>()),
                ci_lo: ci.lo,
                ci_hi: ci.hi,
                replicates: config.replicates,
            },
            exact_eff,
        });
    }
    let argmax_m = argmax(&rows, |r| Some(r.row.emp_eff)).expect("nonempty grid");
    let exact_argmax_m = argmax(&rows, |r| r.exact_eff);
    Ok(CostStudyReport {
        config: config.clone(),
        rows,
        argmax_m,
        exact_argmax_m,
    })
}
