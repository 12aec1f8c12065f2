//! Scripted studies: the tightness counterexamples, random inequality
//! sweeps, the stochastic heat equation inverse problem and the start-up
//! cost study.

pub mod cost;
pub mod counterexamples;
pub mod spde;
pub mod sweep;

pub use crate::estimate::CostModel;
pub use cost::{base_model, run_cost_study, CostRow, CostStudyConfig, CostStudyReport};
pub use counterexamples::{
    indep_model, negcorr_model, run_counterexample_indep, run_counterexample_negcorr,
    run_counterexamples, CounterexampleReport, IndepReport, NegCorrReport,
};
pub use spde::{run_spde_study, SpdeConfig, SpdeReport};
pub use sweep::{
    analyze_model, consistency_check, generate_instance, generate_instances, poisson_check,
    sweep_theorem, Instance, InstanceAnalysis, SweepReport,
};
