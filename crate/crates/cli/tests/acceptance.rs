//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pmavg::exact::pf_relative_variance;
use pmavg::experiments::{
    consistency_check, generate_instance, poisson_check, run_cost_study, run_counterexamples,
    run_spde_study, sweep_theorem, CostStudyConfig, SpdeConfig,
};

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.passed &= took < limit;
    o.detail = format!("{} [{:.2?} of {:?}]", o.detail, took, limit);
    o
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool")
        .install(f)
}

fn counterexamples() -> Outcome {
    let r = match run_counterexamples() {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let i = &r.indep;
    let identity = (i.var_p1 + i.var_pi - 2.0 * (i.var_p2 + i.var_pi)).abs();
    let ok = i.p1.exact_match
        && i.p2.exact_match
        && (i.var_p1 - 5.0 / 6.0).abs() < 1e-12
        && (i.var_p2 - 1.0 / 3.0).abs() < 1e-12
        && i.var_p1 > 2.0 * i.var_p2
        && r.negcorr.identity_defect < 1e-10;
    outcome(
        ok,
        format!(
            "matrices exact {}/{}, var(P1) = {}, var(P2) = {}, identity defect {:.1e}, indep gap {:.3}",
            i.p1.exact_match,
            i.p2.exact_match,
            i.var_p1,
            i.var_p2,
            r.negcorr.identity_defect,
            identity
        ),
    )
}

fn sweep() -> Outcome {
    let report = match single_threaded(|| sweep_theorem(200, SEED, false)) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let functions = report.functions().count();
    let tol = -1e-9;
    let thm1 = report.functions().filter(|f| f.slack_thm1 < tol).count();
    let alpha = report
        .instances
        .iter()
        .filter(|i| i.slack_alpha < tol)
        .count();
    let cor2_checked = report
        .functions()
        .filter(|f| f.slack_cor2.is_some())
        .count();
    let cor2 = report
        .functions()
        .filter(|f| f.slack_cor2.is_some_and(|c| c < tol))
        .count();
    let prop2 = report.functions().filter(|f| f.slack_prop2 < tol).count();
    let ok = report.instances.len() == 200
        && functions == 4000
        && report.instances.iter().all(|i| i.s < i.m && i.m <= 4)
        && thm1 + alpha + cor2 + prop2 == 0;
    outcome(
        ok,
        format!(
            "{} instances, {functions} functions; violations: ineq {thm1}, acceptance {alpha}, \
             positive-kernel {cor2} of {cor2_checked} checked, continuous-time {prop2}",
            report.instances.len()
        ),
    )
}

fn identity() -> Outcome {
    let report = match sweep_theorem(200, SEED, false) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let worst = report
        .functions()
        .map(|f| f.identity_defect)
        .fold(0.0, f64::max);
    let inst = match generate_instance(SEED, 0) {
        Ok(i) => i,
        Err(e) => return outcome(false, e.to_string()),
    };
    let check = match poisson_check(&inst, 50, 1e4, SEED) {
        Ok(c) => c,
        Err(e) => return outcome(false, e.to_string()),
    };
    let z = (check.estimate - check.exact) / check.se;
    outcome(
        worst <= 1e-10 && check.within(4.0),
        format!(
            "max identity defect {worst:.1e}; Poissonized T·var = {:.5} vs exact {:.5} ({z:+.2} SE, 50 reps, T = 1e4)",
            check.estimate, check.exact
        ),
    )
}

fn consistency() -> Outcome {
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let row = generate_instance(SEED, i)
            .and_then(|inst| consistency_check(&inst, 1_000_000, SEED, 4.0));
        match row {
            Ok(r) => {
                within += usize::from(r.within);
                worst = worst.max((r.estimate - r.exact).abs() / r.se);
            }
            Err(e) => return outcome(false, format!("instance {i}: {e}")),
        }
    }
    outcome(
        within * 100 >= 95 * 40,
        format!("{within}/40 within 4 SE of the exact variance (largest deviation {worst:.2} SE)"),
    )
}

fn spde() -> Outcome {
    let config = SpdeConfig::default();
    let report = match run_spde_study(&config, SEED) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let ok = config.j == 50
        && config.iterations == 200_000
        && config.replicates == 5
        && config.m_list == [1, 2, 3, 5, 10]
        && report.strictly_decreasing()
        && report.first_above_last();
    let cells: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "m={} {:.3e} [{:.3e}, {:.3e}]",
                r.m, r.ess_star, r.ci_lo, r.ci_hi
            )
        })
        .collect();
    outcome(
        ok,
        format!("rho = {:.6}; ESS*: {}", report.rho, cells.join(", ")),
    )
}

fn cost() -> Outcome {
    let config = CostStudyConfig::default();
    let report = match run_cost_study(&config, SEED) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let ok = config.cost.c0 / config.cost.c1 == 200.0
        && config.rel_var == 1.0
        && config.m_grid == [1, 2, 5, 10, 20, 50, 100, 200, 400, 1000]
        && (50..=800).contains(&report.argmax_m);
    let best = report
        .rows
        .iter()
        .find(|r| r.row.m == report.argmax_m)
        .expect("argmax row");
    outcome(
        ok,
        format!(
            "argmax m = {} (efficiency {:.4e})",
            report.argmax_m, best.row.emp_eff
        ),
    )
}

fn particle_filter() -> Outcome {
    let c: Vec<f64> = (1..=10).map(f64::from).collect();
    let m = 100_000;
    let (a, b, ratio) = match (
        pf_relative_variance(&[2.5], 4),
        pf_relative_variance(&[1.0, 2.0], 2),
        pf_relative_variance(&c, m),
    ) {
        (Ok(a), Ok(b), Ok(v)) => (a, b, v / (c[0] / m as f64)),
        _ => return outcome(false, "evaluation failed".into()),
    };
    outcome(
        a == 2.5 / 4.0 && b == 0.75 && (ratio - 1.0).abs() < 1e-3,
        format!("T=1: {a}; (1,2), m=2: {b}; ratio at m=1e5, T=10: {ratio:.6}"),
    )
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn manifest_without_times(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("manifest.json")).expect("manifest");
    let mut v: serde_json::Value = serde_json::from_str(&text).expect("manifest json");
    let obj = v.as_object_mut().expect("object");
    obj.remove("started_unix");
    obj.remove("finished_unix");
    v
}

fn determinism() -> Outcome {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = |name: &str| configs.join(name).to_string_lossy().into_owned();
    let runs: Vec<Vec<String>> = vec![
        vec!["counterexamples".into()],
        vec![
            "sweep".into(),
            "--instances".into(),
            "200".into(),
            "--seed".into(),
            "7".into(),
        ],
        vec!["spde".into(), "--config".into(), cfg("spde_quick.json")],
        vec![
            "cost-study".into(),
            "--config".into(),
            cfg("cost_quick.json"),
        ],
        vec![
            "analyze".into(),
            "--config".into(),
            cfg("indep_model.json"),
            "--matrices".into(),
        ],
        vec![
            "estimate".into(),
            "--config".into(),
            cfg("negcorr_model.json"),
            "--r".into(),
            "2".into(),
        ],
        vec![
            "estimate".into(),
            "--config".into(),
            cfg("indep_model.json"),
            "--kernel".into(),
            "embedded-m".into(),
        ],
    ];
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut failures = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{i}_{rep}"));
            let status = Command::new(env!("CARGO_BIN_EXE_pmavg"))
                .args(args)
                .args(["--quiet", "--out", dir.to_str().unwrap()])
                .env("PM_AVG_THREADS", if rep == 0 { "1" } else { "2" })
                .status()
                .expect("binary runs");
            if status.code() != Some(0) {
                failures.push(format!("{} exited {:?}", args[0], status.code()));
            }
            outputs.push((data_files(&dir), manifest_without_times(&dir)));
        }
        if outputs[0] != outputs[1] || outputs[0].0.is_empty() {
            failures.push(format!("{} differs", args.join(" ")));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "{} subcommand runs repeated with identical files",
                runs.len()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; a name filter
    // that matches nothing here skips the suite.
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("1 counterexamples", Duration::from_secs(1), counterexamples),
        ("2 theorem sweep", Duration::from_secs(120), sweep),
        (
            "3 continuous/discrete identity",
            Duration::from_secs(600),
            identity,
        ),
        (
            "4 estimator consistency",
            Duration::from_secs(600),
            consistency,
        ),
        ("5 SPDE ordering", Duration::from_secs(1800), spde),
        ("6 cost study", Duration::from_secs(600), cost),
        (
            "7 particle-filter formula",
            Duration::from_secs(60),
            particle_filter,
        ),
        ("8 determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let o = timed(limit, f);
        failed += usize::from(!o.passed);
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
