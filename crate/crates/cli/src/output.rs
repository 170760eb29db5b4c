//! CSV tables with JSON provenance sidecars.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub tool: &'static str,
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub family: &'static str,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            family: std::env::consts::FAMILY,
        }
    }

    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("environment serializes").as_bytes())
    }
}

/// Sidecar written next to every CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<'a, C: Serialize, S: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub config_sha256: String,
    pub environment: Environment,
    pub environment_sha256: String,
    pub timestamp_unix: u64,
    pub files: Vec<String>,
    pub summary: &'a S,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| output_error(path, e))?;
    }
    writer.flush().map_err(|e| output_error(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| output_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_error(path, e))
}

pub fn write_sidecar<C: Serialize, S: Serialize>(
    path: &Path,
    command: &str,
    config: &C,
    files: &[PathBuf],
    summary: &S,
) -> CliResult<()> {
    let config_json = serde_json::to_string(config).map_err(|e| output_error(path, e))?;
    let environment = Environment::current();
    let provenance = Provenance {
        command,
        config,
        config_sha256: sha256_hex(config_json.as_bytes()),
        environment_sha256: environment.hash(),
        environment,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        files: files
            .iter()
            .map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
        summary,
    };
    write_json(path, &provenance)
}
