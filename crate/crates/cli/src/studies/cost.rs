use clap::{ArgMatches, Args, Command};
use pmavg::experiments::{run_cost_study, CostStudyConfig};

use super::{load_config, parse, to_value, Study};
use crate::output::{RunContext, StudyOutput};
use crate::CliError;

pub struct CostStudy;

#[derive(Debug, Args)]
struct CostArgs {
    /// Fixed cost per iteration.
    #[arg(long)]
    c0: Option<f64>,
    /// Cost per weight draw.
    #[arg(long)]
    c1: Option<f64>,
    /// Chain length per replicate.
    #[arg(long)]
    iterations: Option<usize>,
    /// Independent chains per m.
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated estimator counts.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Also solve the exact efficiency for every m.
    #[arg(long)]
    exact: bool,
}

impl Study for CostStudy {
    fn name(&self) -> &'static str {
        "cost-study"
    }

    fn command(&self) -> Command {
        CostArgs::augment_args(
            Command::new(self.name()).about("Efficiency per unit cost with a start-up cost"),
        )
    }

    fn run(&self, args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError> {
        let args: CostArgs = parse(args)?;
        let mut config: CostStudyConfig = load_config(ctx)?;
        if let Some(c0) = args.c0 {
            config.cost.c0 = c0;
        }
        if let Some(c1) = args.c1 {
            config.cost.c1 = c1;
        }
        if let Some(n) = args.iterations {
            config.iterations = n;
        }
        if let Some(r) = args.replicates {
            config.replicates = r;
        }
        if let Some(m) = args.m {
            config.m_grid = m;
        }
        config.exact |= args.exact;
        let report = run_cost_study(&config, ctx.seed)?;
        let mut summary = format!("empirical argmax m = {}", report.argmax_m);
        if let Some(m) = report.exact_argmax_m {
            summary.push_str(&format!(", exact argmax m = {m}"));
        }
        let mut out = StudyOutput {
            summary,
            violations: 0,
            config: to_value(&config),
            ..Default::default()
        };
        let rows: Vec<_> = report.rows.iter().map(|r| r.row.clone()).collect();
        out.table("cost", &rows, ctx.format)?;
        out.json("cost_report.json", &report);
        Ok(out)
    }
}
