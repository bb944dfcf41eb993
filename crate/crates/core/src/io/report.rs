//! Provenance records and JSON reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON of the configuration.
    pub config_hash: String,
    pub crate_version: String,
    pub command: String,
    pub seed: u64,
    /// Reductions are sequential, so results do not depend on this.
    pub threads: usize,
    pub wall_time_s: f64,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C, command: &str, seed: u64, wall_time_s: f64) -> Result<Self> {
        Ok(Provenance {
            config_hash: config_hash(config)?,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            threads: thread_count(),
            wall_time_s,
        })
    }
}

/// Thread count from `LPBS_THREADS`, defaulting to one.
pub fn thread_count() -> usize {
    std::env::var("LPBS_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    // serde_json::Value orders object keys, which makes the text canonical
    let value = serde_json::to_value(config)?;
    let text = serde_json::to_string(&value)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
