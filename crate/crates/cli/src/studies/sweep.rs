use clap::{ArgMatches, Args, Command};
use pmavg::experiments::sweep::FunctionResult;
use pmavg::experiments::{sweep_theorem, InstanceAnalysis};
use serde::{Deserialize, Serialize};

use super::{no_config, parse, to_value, Study};
use crate::output::{RunContext, StudyOutput};
use crate::CliError;

pub struct Sweep;

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    /// Number of random finite instances.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Keep the model and both transition matrices in the JSON records.
    #[arg(long)]
    matrices: bool,
}

/// One line of the summary table.
#[derive(Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: usize,
    pub s: usize,
    pub m: usize,
    pub phi: usize,
    pub var_s: f64,
    pub var_m: f64,
    pub slack_thm1: f64,
    pub slack_cor2: Option<f64>,
    pub slack_prop2: f64,
    pub alpha_ratio: f64,
}

impl From<&FunctionResult> for SummaryRow {
    fn from(f: &FunctionResult) -> Self {
        Self {
            instance: f.instance,
            s: f.s,
            m: f.m,
            phi: f.phi,
            var_s: f.var_s,
            var_m: f.var_m,
            slack_thm1: f.slack_thm1,
            slack_cor2: f.slack_cor2,
            slack_prop2: f.slack_prop2,
            alpha_ratio: f.alpha_ratio,
        }
    }
}

pub fn summary_rows<'a>(records: impl Iterator<Item = &'a InstanceAnalysis>) -> Vec<SummaryRow> {
    records
        .flat_map(|r| r.functions.iter().map(SummaryRow::from))
        .collect()
}

impl Study for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn command(&self) -> Command {
        SweepArgs::augment_args(
            Command::new(self.name()).about("Exact inequality checks on random finite instances"),
        )
    }

    fn run(&self, args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError> {
        no_config(ctx, self.name())?;
        let args: SweepArgs = parse(args)?;
        let report = sweep_theorem(args.instances, ctx.seed, args.matrices)?;
        let violations = report.violations();
        let functions = report.functions().count();
        let mut out = StudyOutput {
            summary: format!(
                "{} instances, {functions} functions, {violations} violations",
                report.instances.len()
            ),
            violations,
            config: to_value(&args),
            ..Default::default()
        };
        out.table("sweep", &summary_rows(report.instances.iter()), ctx.format)?;
        out.json("sweep_records.json", &report);
        Ok(out)
    }
}
