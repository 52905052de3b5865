use std::path::Path;

use concate_core::montecarlo::RNG_IDENTITY;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 of the resolved settings, excluding file paths and thread count.
    pub config_hash: String,
    pub rng: &'static str,
}

impl Metadata {
    pub fn new(command: &'static str, seed: Option<u64>, settings: &impl Serialize) -> Result<Self> {
        Ok(Metadata {
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_hash: config_hash(settings)?,
            rng: RNG_IDENTITY,
        })
    }
}

pub fn config_hash(settings: &impl Serialize) -> Result<String> {
    let bytes = serde_json::to_vec(settings)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

/// CSV from a header and string rows, written in one piece.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_file(path, bytes)
}

pub fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
