use clap::{ArgMatches, Args, Command};
use pmavg::exact::DEFAULT_STATE_CAP;
use pmavg::experiments::analyze_model;

use super::sweep::summary_rows;
use super::{model_config, parse, Study};
use crate::output::{RunContext, StudyOutput};
use crate::CliError;

pub struct Analyze;

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Smaller estimator count; overrides the model file.
    #[arg(long)]
    s: Option<usize>,
    /// Larger estimator count; overrides the model file.
    #[arg(long)]
    m: Option<usize>,
    /// Keep the model and both transition matrices in the record.
    #[arg(long)]
    matrices: bool,
    /// Largest state space either kernel may have.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: usize,
}

impl Study for Analyze {
    fn name(&self) -> &'static str {
        "analyze"
    }

    fn command(&self) -> Command {
        AnalyzeArgs::augment_args(
            Command::new(self.name()).about("Exact comparison of P_s and P_m on a model file"),
        )
    }

    fn run(&self, args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError> {
        let args: AnalyzeArgs = parse(args)?;
        let file = model_config(ctx, self.name())?;
        let model = file.build()?;
        let s = args.s.or(file.s).unwrap_or(1);
        let m = args.m.or(file.m).unwrap_or(2);
        let mut phis: Vec<Vec<f64>> = file.test_functions().into_iter().map(|(_, v)| v).collect();
        if phis.is_empty() {
            let n = model.num_states();
            phis = (0..n)
                .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
                .collect();
        }
        let record = analyze_model(0, &model, s, m, &phis, args.matrices, args.state_cap)?;
        let violations = record.violations();
        let mut out = StudyOutput {
            summary: format!(
                "s = {s}, m = {m}: {} functions, {violations} violations",
                record.functions.len()
            ),
            violations,
            config: serde_json::json!({
                "model": file,
                "s": s,
                "m": m,
                "matrices": args.matrices,
                "state_cap": args.state_cap,
            }),
            ..Default::default()
        };
        out.table(
            "analyze",
            &summary_rows(std::iter::once(&record)),
            ctx.format,
        )?;
        out.json("analyze_record.json", &record);
        Ok(out)
    }
}
