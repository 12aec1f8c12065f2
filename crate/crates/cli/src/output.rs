use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Settings shared by every study.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub seed: u64,
    pub format: Format,
    pub config: Option<PathBuf>,
}

impl RunContext {
    pub fn read_config(&self) -> Result<Option<String>, CliError> {
        match &self.config {
            Some(p) => fs::read_to_string(p)
                .map(Some)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display()))),
            None => Ok(None),
        }
    }
}

/// Files produced by a study, plus what to tell the user.
#[derive(Debug, Default)]
pub struct StudyOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
    pub violations: usize,
    /// Canonical form of the effective configuration.
    pub config: serde_json::Value,
}

impl StudyOutput {
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("study output serializes");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// A table as CSV or as a JSON array, by `format`.
    pub fn table<T: Serialize>(
        &mut self,
        stem: &str,
        rows: &[T],
        format: Format,
    ) -> Result<(), CliError> {
        match format {
            Format::Csv => self.csv(&format!("{stem}.csv"), rows),
            Format::Json => {
                self.json(&format!("{stem}.json"), &rows);
                Ok(())
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// SHA-256 of the compact JSON form, hex encoded.
pub fn config_hash(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

/// Writes the study files and `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    subcommand: &str,
    ctx: &RunContext,
    output: &StudyOutput,
    started: f64,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(output.files.len() + 1);
    for (name, bytes) in &output.files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        written.push(path);
    }
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config_hash: config_hash(&serde_json::json!({
            "subcommand": subcommand,
            "seed": ctx.seed,
            "config": output.config,
        })),
        seed: ctx.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: output.files.iter().map(|(n, _)| n.clone()).collect(),
        started_unix: started,
        finished_unix: unix_now(),
    };
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes)?;
    written.push(path);
    Ok(written)
}
