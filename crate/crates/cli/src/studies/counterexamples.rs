use clap::{ArgMatches, Command};
use pmavg::experiments::run_counterexamples;
use serde::Serialize;

use super::{no_config, Study};
use crate::output::{RunContext, StudyOutput};
use crate::CliError;

pub struct Counterexamples;

#[derive(Serialize)]
struct Row {
    quantity: &'static str,
    value: f64,
    expected: Option<f64>,
    abs_error: Option<f64>,
}

fn row(quantity: &'static str, value: f64, expected: Option<f64>) -> Row {
    Row {
        quantity,
        value,
        expected,
        abs_error: expected.map(|e| (value - e).abs()),
    }
}

impl Study for Counterexamples {
    fn name(&self) -> &'static str {
        "counterexamples"
    }

    fn command(&self) -> Command {
        Command::new(self.name())
            .about("Exact variances and matrices of the two tightness examples")
    }

    fn run(&self, _args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError> {
        no_config(ctx, self.name())?;
        let report = run_counterexamples()?;
        let (n, i) = (&report.negcorr, &report.indep);
        let rows = vec![
            row("indep.var_pi", i.var_pi, Some(0.5)),
            row("indep.var_p1", i.var_p1, Some(5.0 / 6.0)),
            row("indep.var_p2", i.var_p2, Some(1.0 / 3.0)),
            row("indep.thm1_lhs", i.thm1_lhs, Some(4.0 / 3.0)),
            row("indep.thm1_rhs", i.thm1_rhs, Some(5.0 / 3.0)),
            row(
                "indep.p1_exact",
                f64::from(u8::from(i.p1.exact_match)),
                Some(1.0),
            ),
            row(
                "indep.p2_exact",
                f64::from(u8::from(i.p2.exact_match)),
                Some(1.0),
            ),
            row("negcorr.var_pi", n.var_pi, Some(0.5)),
            row("negcorr.var_p1", n.var_p1, None),
            row("negcorr.var_p2", n.var_p2, None),
            row("negcorr.var_mh", n.var_mh, None),
            row("negcorr.identity_defect", n.identity_defect, Some(0.0)),
            row("negcorr.dirichlet_p1", n.dirichlet_p1, None),
            row("negcorr.dirichlet_p2", n.dirichlet_p2, Some(n.dirichlet_mh)),
            row("negcorr.dirichlet_ratio", n.dirichlet_ratio, Some(0.5)),
        ];
        let mut out = StudyOutput {
            summary: format!(
                "var(P1) = {}, var(P2) = {}, identity defect = {:.1e}: {}",
                i.var_p1,
                i.var_p2,
                n.identity_defect,
                if report.passed() { "ok" } else { "FAILED" }
            ),
            violations: usize::from(!report.passed()),
            config: serde_json::json!({}),
            ..Default::default()
        };
        out.table("counterexamples", &rows, ctx.format)?;
        out.json("counterexamples_report.json", &report);
        Ok(out)
    }
}
