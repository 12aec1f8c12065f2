use std::sync::Arc;

use clap::{ArgMatches, Args, Command};
use pmavg::estimate::{ess_and_cost, CostModel};
use pmavg::kernels::{KernelParams, KernelRegistry, TrajectoryMeta};
use pmavg::model::model_hash;
use pmavg::rng::stream;

use super::{model_config, parse, Study};
use crate::output::{RunContext, StudyOutput};
use crate::CliError;

const TAG_ESTIMATE: u64 = 20;

pub struct Estimate;

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Kernel name: mh, pm, embedded-s or embedded-m.
    #[arg(long, default_value = "pm")]
    kernel: String,
    /// Weights averaged by the pm kernel.
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Window length of the embedded kernels.
    #[arg(long)]
    s: Option<usize>,
    /// Weights carried by the embedded kernels.
    #[arg(long)]
    m: Option<usize>,
    /// Chain length.
    #[arg(long, default_value_t = 100_000)]
    iterations: usize,
    /// Keep every k-th iteration in the trajectory dump.
    #[arg(long, default_value_t = 1)]
    thin: usize,
}

impl Study for Estimate {
    fn name(&self) -> &'static str {
        "estimate"
    }

    fn command(&self) -> Command {
        EstimateArgs::augment_args(
            Command::new(self.name()).about("Simulate one kernel on a model file and estimate ESS"),
        )
    }

    fn run(&self, args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError> {
        let args: EstimateArgs = parse(args)?;
        if args.thin == 0 {
            return Err(CliError::Usage("--thin must be positive".into()));
        }
        let file = model_config(ctx, self.name())?;
        let model = Arc::new(file.build()?);
        let strategy = KernelRegistry::global().get(&args.kernel)?;
        let params = if args.kernel.starts_with("embedded") {
            let m = args.m.or(file.m).unwrap_or(2);
            KernelParams::embedded(args.s.or(file.s).unwrap_or(1), m)
        } else {
            KernelParams::averaged(args.r)
        };
        let labelled = file.test_functions();
        let (labels, phis): (Vec<String>, Vec<Vec<f64>>) = if labelled.is_empty() {
            let n = model.num_states();
            (
                vec!["x".to_string()],
                vec![(1..=n).map(|i| i as f64).collect()],
            )
        } else {
            labelled.into_iter().unzip()
        };
        let path = [TAG_ESTIMATE];
        let mut rng = stream(ctx.seed, &path);
        let mut traj = strategy.simulate(&model, &params, args.iterations, &phis, &mut rng)?;
        traj.meta = Some(TrajectoryMeta {
            seed: ctx.seed,
            stream: path.to_vec(),
            model_hash: model_hash(&file),
            r: params.r,
            kernel: strategy.name().to_string(),
        });
        let pi = model.target.pi();
        let units = strategy.cost_units(&params).max(1);
        let records = phis
            .iter()
            .zip(&labels)
            .enumerate()
            .map(|(j, (phi, label))| {
                let mean: f64 = pi.iter().zip(phi).map(|(p, v)| p * v).sum();
                let var_pi = pi
                    .iter()
                    .zip(phi)
                    .map(|(p, v)| p * (v - mean).powi(2))
                    .sum();
                ess_and_cost(&traj, j, label, Some(var_pi), CostModel::default(), units)
            })
            .collect::<pmavg::Result<Vec<_>>>()?;

        let mut dump = Vec::new();
        traj.write_csv(&mut dump, args.thin)?;
        let mut out = StudyOutput {
            summary: records
                .iter()
                .map(|r| {
                    format!(
                        "{}: ESS = {:.1}, acceptance {:.3}",
                        r.phi, r.ess, r.accept_rate
                    )
                })
                .collect::<Vec<_>>()
                .join("; "),
            violations: 0,
            config: serde_json::json!({
                "model": file,
                "kernel": strategy.name(),
                "r": params.r,
                "s": params.s,
                "m": params.m,
                "iterations": args.iterations,
                "thin": args.thin,
            }),
            ..Default::default()
        };
        out.files.push(("trajectory.csv".into(), dump));
        out.json("trajectory_meta.json", &traj.meta);
        out.table("efficiency", &records, ctx.format)?;
        Ok(out)
    }
}
