//! The `pmavg` command line: every study behind one binary, with seeded,
//! byte-reproducible outputs and a run manifest.

mod error;
pub mod output;
pub mod studies;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, Command};

pub use error::CliError;
use output::{unix_now, write_outputs, Format, RunContext};
use studies::StudyRegistry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

fn global_args(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("seed")
            .long("seed")
            .global(true)
            .display_order(100)
            .value_parser(clap::value_parser!(u64))
            .default_value("1")
            .help("Master seed"),
    )
    .arg(
        Arg::new("out")
            .long("out")
            .global(true)
            .display_order(100)
            .value_parser(clap::value_parser!(PathBuf))
            .default_value("out")
            .help("Output directory"),
    )
    .arg(
        Arg::new("threads")
            .long("threads")
            .global(true)
            .display_order(100)
            .env("PM_AVG_THREADS")
            .value_parser(clap::value_parser!(usize))
            .help("Worker threads"),
    )
    .arg(
        Arg::new("format")
            .long("format")
            .global(true)
            .display_order(100)
            .value_parser(clap::value_parser!(Format))
            .default_value("csv")
            .help("Table format"),
    )
    .arg(
        Arg::new("config")
            .long("config")
            .global(true)
            .display_order(100)
            .value_parser(clap::value_parser!(PathBuf))
            .help("JSON config or model file"),
    )
    .arg(
        Arg::new("quiet")
            .long("quiet")
            .short('q')
            .global(true)
            .display_order(100)
            .action(ArgAction::SetTrue)
            .help("Print nothing on success"),
    )
}

pub fn command(registry: &StudyRegistry) -> Command {
    let mut cmd = global_args(
        Command::new("pmavg")
            .version(env!("CARGO_PKG_VERSION"))
            .about("Averaged-estimator pseudo-marginal MCMC: exact checks and simulation studies")
            .subcommand_required(true)
            .arg_required_else_help(true),
    );
    for study in registry.iter() {
        cmd = cmd.subcommand(study.command());
    }
    cmd
}

/// Parses `argv`, runs the chosen study and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let registry = StudyRegistry::with_builtin();
    let matches = match command(&registry).try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let study = registry.get(name).expect("registered subcommand");
    let ctx = RunContext {
        seed: *sub.get_one::<u64>("seed").expect("defaulted"),
        format: *sub.get_one::<Format>("format").expect("defaulted"),
        config: sub.get_one::<PathBuf>("config").cloned(),
    };
    let out_dir = sub.get_one::<PathBuf>("out").expect("defaulted").clone();
    let quiet = sub.get_flag("quiet");

    if let Some(&n) = sub.get_one::<usize>("threads") {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return EXIT_ERROR;
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    let started = unix_now();
    let result = study.run(sub, &ctx).and_then(|output| {
        write_outputs(&out_dir, name, &ctx, &output, started).map(|p| (output, p))
    });
    match result {
        Ok((output, paths)) => {
            if !quiet || output.violations > 0 {
                println!("{name}: {}", output.summary);
                for p in &paths {
                    println!("  wrote {}", p.display());
                }
            }
            if output.violations > 0 {
                eprintln!("{name}: {} violation(s)", output.violations);
                EXIT_VIOLATION
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
