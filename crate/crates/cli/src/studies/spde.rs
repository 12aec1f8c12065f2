use clap::{ArgMatches, Args, Command};
use pmavg::experiments::{run_spde_study, SpdeConfig};

use super::{load_config, parse, to_value, Study};
use crate::output::{RunContext, StudyOutput};
use crate::CliError;

pub struct Spde;

#[derive(Debug, Args)]
struct SpdeArgs {
    /// Chain length per replicate.
    #[arg(long)]
    iterations: Option<usize>,
    /// Independent chains per m.
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated estimator counts.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Fixed Crank-Nicolson correlation, skipping the pilot.
    #[arg(long)]
    rho: Option<f64>,
    /// Forward solver inside the chains.
    #[arg(long)]
    solver: Option<String>,
}

impl Study for Spde {
    fn name(&self) -> &'static str {
        "spde"
    }

    fn command(&self) -> Command {
        SpdeArgs::augment_args(
            Command::new(self.name())
                .about("Stochastic heat equation inverse problem: ESS per draw against m"),
        )
    }

    fn run(&self, args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError> {
        let args: SpdeArgs = parse(args)?;
        let mut config: SpdeConfig = load_config(ctx)?;
        if let Some(n) = args.iterations {
            config.iterations = n;
        }
        if let Some(r) = args.replicates {
            config.replicates = r;
        }
        if let Some(m) = args.m {
            config.m_list = m;
        }
        if args.rho.is_some() {
            config.rho = args.rho;
        }
        if let Some(s) = args.solver {
            config.solver = s;
        }
        let report = run_spde_study(&config, ctx.seed)?;
        let ordered = report.strictly_decreasing();
        let separated = report.first_above_last();
        let mut out = StudyOutput {
            summary: format!(
                "rho = {:.4}; ESS* by m: {}; decreasing: {ordered}; end intervals disjoint: {separated}",
                report.rho,
                report
                    .rows
                    .iter()
                    .map(|r| format!("{}={:.4e}", r.m, r.ess_star))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            violations: 0,
            config: to_value(&config),
            ..Default::default()
        };
        out.table("spde", &report.rows, ctx.format)?;
        out.json("spde_report.json", &report);
        Ok(out)
    }
}
