//! Subcommands, registered by name and dispatched at runtime.

mod analyze;
mod cost;
mod counterexamples;
mod estimate;
mod spde;
mod sweep;

use std::collections::BTreeMap;
use std::sync::Arc;

use clap::{ArgMatches, Command};
use serde::de::DeserializeOwned;

use crate::output::{RunContext, StudyOutput};
use crate::CliError;

pub trait Study: Send + Sync {
    fn name(&self) -> &'static str;

    /// The subcommand with its own flags attached.
    fn command(&self) -> Command;

    fn run(&self, args: &ArgMatches, ctx: &RunContext) -> Result<StudyOutput, CliError>;
}

pub struct StudyRegistry {
    studies: BTreeMap<&'static str, Arc<dyn Study>>,
}

impl StudyRegistry {
    pub fn with_builtin() -> Self {
        let mut reg = Self {
            studies: BTreeMap::new(),
        };
        reg.register(Arc::new(counterexamples::Counterexamples));
        reg.register(Arc::new(sweep::Sweep));
        reg.register(Arc::new(spde::Spde));
        reg.register(Arc::new(cost::CostStudy));
        reg.register(Arc::new(analyze::Analyze));
        reg.register(Arc::new(estimate::Estimate));
        reg
    }

    pub fn register(&mut self, study: Arc<dyn Study>) {
        self.studies.insert(study.name(), study);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Study>> {
        self.studies.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Study>> {
        self.studies.values()
    }
}

/// Flags parsed through clap's derive API.
fn parse<T: clap::FromArgMatches>(args: &ArgMatches) -> Result<T, CliError> {
    T::from_arg_matches(args).map_err(|e| CliError::Usage(e.to_string()))
}

/// The `--config` file as `T`, or `T::default()` without one.
fn load_config<T: DeserializeOwned + Default>(ctx: &RunContext) -> Result<T, CliError> {
    match ctx.read_config()? {
        Some(text) => Ok(serde_json::from_str(&text)?),
        None => Ok(T::default()),
    }
}

fn no_config(ctx: &RunContext, study: &str) -> Result<(), CliError> {
    match &ctx.config {
        Some(_) => Err(CliError::Usage(format!("`{study}` takes no config file"))),
        None => Ok(()),
    }
}

fn model_config(ctx: &RunContext, study: &str) -> Result<pmavg::model::ModelFile, CliError> {
    let text = ctx
        .read_config()?
        .ok_or_else(|| CliError::Usage(format!("`{study}` needs a model file via --config")))?;
    Ok(pmavg::model::ModelFile::from_json(&text)?)
}

fn to_value<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("config serializes")
}
