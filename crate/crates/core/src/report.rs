//! Self-describing JSON reports.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

/// Header plus payload. The embedded config and seed are enough to rerun
/// `command` and obtain the same report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub config: RunConfig,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, results: impl Serialize) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_digest: config.digest()?,
            seed: config.seed,
            config: config.clone(),
            results: serde_json::to_value(results)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Checks that the embedded digest matches the embedded config.
    pub fn verify_digest(&self) -> Result<()> {
        let actual = self.config.digest()?;
        if actual != self.config_digest {
            return Err(Error::InvalidInput(format!(
                "config digest mismatch: header {} vs content {actual}",
                self.config_digest
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

/// Writes `bytes` to a temp file next to `path`, then renames it into place.
/// Readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
