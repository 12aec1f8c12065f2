//! The two tightness counterexamples on `X = {1, 2}` with `π ∝ (2, 1)` and
//! the deterministic swap proposal.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::exact::{
    build_mh_matrix, build_pm_matrix, dirichlet_form, Fundamental, KernelMatrix, DEFAULT_STATE_CAP,
};
use crate::model::{
    AtomTable, FiniteModel, FiniteProposal, FiniteTarget, Scalar, TupleSet, WeightModel,
};
use crate::Result;

/// `φ(1) = −1/2`, `φ(2) = 1`.
pub const PHI: [f64; 2] = [-0.5, 1.0];

fn swap_target() -> Result<(FiniteTarget, FiniteProposal)> {
    let target = FiniteTarget::new(
        vec!["1".into(), "2".into()],
        vec![Scalar::ratio(2, 1), Scalar::ratio(1, 1)],
    )?;
    let proposal = FiniteProposal::new(vec![
        vec![Scalar::ratio(0, 1), Scalar::ratio(1, 1)],
        vec![Scalar::ratio(1, 1), Scalar::ratio(0, 1)],
    ])?;
    Ok((target, proposal))
}

/// Weights uniform on `{(0, 2), (2, 0)}` at both points.
pub fn negcorr_model() -> Result<FiniteModel> {
    let (target, proposal) = swap_target()?;
    let pair = TupleSet::new(vec![
        vec![Scalar::ratio(0, 1), Scalar::ratio(2, 1)],
        vec![Scalar::ratio(2, 1), Scalar::ratio(0, 1)],
    ])?;
    FiniteModel::new(
        target,
        proposal,
        WeightModel::ExchangeableFinite(vec![pair.clone(), pair]),
    )
}

/// `W ≡ 1` at `x = 1`; `W ∈ {0, 4}` with `P(W = 4) = 1/4` at `x = 2`.
pub fn indep_model() -> Result<FiniteModel> {
    let (target, proposal) = swap_target()?;
    let weights = WeightModel::IndependentFinite(vec![
        AtomTable::new(vec![(Scalar::ratio(1, 1), Scalar::ratio(1, 1))])?,
        AtomTable::new(vec![
            (Scalar::ratio(0, 1), Scalar::ratio(3, 4)),
            (Scalar::ratio(4, 1), Scalar::ratio(1, 4)),
        ])?,
    ]);
    FiniteModel::new(target, proposal, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegCorrReport {
    pub var_pi: f64,
    pub var_p1: f64,
    pub var_p2: f64,
    pub var_mh: f64,
    /// `|var(P₁) + Var_π − 2{var(P₂) + Var_π}|`.
    pub identity_defect: f64,
    pub dirichlet_p1: f64,
    pub dirichlet_p2: f64,
    pub dirichlet_mh: f64,
    pub dirichlet_ratio: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCheck {
    pub states: Vec<String>,
    pub computed: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    pub exact_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndepReport {
    pub p1: MatrixCheck,
    pub p2: MatrixCheck,
    pub var_pi: f64,
    pub var_p1: f64,
    pub var_p2: f64,
    /// `var(P₁) > 2 var(P₂)`.
    pub strict_gap: bool,
    /// `1 · {var(P₁) + Var_π}`.
    pub thm1_lhs: f64,
    /// `2 · {var(P₂) + Var_π}`.
    pub thm1_rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub negcorr: NegCorrReport,
    pub indep: IndepReport,
}

impl CounterexampleReport {
    pub fn passed(&self) -> bool {
        self.negcorr.passed && self.indep.passed
    }
}

fn rows(p: &DMatrix<f64>) -> Vec<Vec<f64>> {
    p.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check(kernel: &KernelMatrix, expected: Vec<Vec<f64>>) -> MatrixCheck {
    let computed = rows(kernel.p());
    MatrixCheck {
        states: kernel.states().iter().map(ToString::to_string).collect(),
        exact_match: computed == expected,
        computed,
        expected,
    }
}

struct Analysed {
    var_pi: f64,
    var: f64,
    dirichlet: f64,
}

fn analyse(kernel: &KernelMatrix) -> Result<Analysed> {
    let pi = kernel.pi()?;
    let f = Fundamental::new(kernel, &pi)?;
    let phi: DVector<f64> = kernel.lift(&PHI);
    Ok(Analysed {
        var_pi: f.var_pi(&phi),
        var: f.asym_var(&phi)?,
        dirichlet: dirichlet_form(kernel, &pi, &phi),
    })
}

pub fn run_counterexample_negcorr() -> Result<NegCorrReport> {
    let model = negcorr_model()?;
    let p1 = analyse(&build_pm_matrix(&model, 1, DEFAULT_STATE_CAP)?)?;
    let p2 = analyse(&build_pm_matrix(&model, 2, DEFAULT_STATE_CAP)?)?;
    let mh = analyse(&build_mh_matrix(&model)?)?;
    let var_pi = mh.var_pi;
    let identity_defect = (p1.var + var_pi - 2.0 * (p2.var + var_pi)).abs();
    let dirichlet_ratio = p1.dirichlet / mh.dirichlet;
    let passed = identity_defect < 1e-10
        && (p1.dirichlet - 0.5 * mh.dirichlet).abs() < 1e-12
        && (p2.dirichlet - mh.dirichlet).abs() < 1e-12;
    Ok(NegCorrReport {
        var_pi,
        var_p1: p1.var,
        var_p2: p2.var,
        var_mh: mh.var,
        identity_defect,
        dirichlet_p1: p1.dirichlet,
        dirichlet_p2: p2.dirichlet,
        dirichlet_mh: mh.dirichlet,
        dirichlet_ratio,
        passed,
    })
}

pub fn run_counterexample_indep() -> Result<IndepReport> {
    let model = indep_model()?;
    let k1 = build_pm_matrix(&model, 1, DEFAULT_STATE_CAP)?;
    let k2 = build_pm_matrix(&model, 2, DEFAULT_STATE_CAP)?;
    let p1 = check(&k1, vec![vec![0.75, 0.25], vec![0.5, 0.5]]);
    let p2 = check(
        &k2,
        vec![
            vec![0.5625, 0.375, 0.0625],
            vec![1.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.5],
        ],
    );
    let a1 = analyse(&k1)?;
    let a2 = analyse(&k2)?;
    let var_pi = a1.var_pi;
    let strict_gap = a1.var > 2.0 * a2.var;
    let thm1_lhs = a1.var + var_pi;
    let thm1_rhs = 2.0 * (a2.var + var_pi);
    let passed = p1.exact_match
        && p2.exact_match
        && (a1.var - 5.0 / 6.0).abs() < 1e-12
        && (a2.var - 1.0 / 3.0).abs() < 1e-12
        && strict_gap
        && thm1_lhs <= thm1_rhs + 1e-9;
    Ok(IndepReport {
        p1,
        p2,
        var_pi,
        var_p1: a1.var,
        var_p2: a2.var,
        strict_gap,
        thm1_lhs,
        thm1_rhs,
        passed,
    })
}

pub fn run_counterexamples() -> Result<CounterexampleReport> {
    Ok(CounterexampleReport {
        negcorr: run_counterexample_negcorr()?,
        indep: run_counterexample_indep()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negcorr_identity() {
        let r = run_counterexample_negcorr().unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.dirichlet_ratio - 0.5).abs() < 1e-12);
        assert!((r.var_p1 + 0.5 - 2.0 * (r.var_p2 + 0.5)).abs() < 1e-10);
        assert!((r.var_p2 - r.var_mh).abs() < 1e-12);
    }

    #[test]
    fn indep_values() {
        let r = run_counterexample_indep().unwrap();
        assert!(r.passed, "{r:?}");
        assert!((r.var_p1 - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.var_p2 - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.thm1_lhs - 4.0 / 3.0).abs() < 1e-12);
        assert!((r.thm1_rhs - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.p2.states, vec!["(1,1)", "(2,2)", "(2,4)"]);
    }
}
