use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Provenance record written next to every output set.
///
/// `argv` replays the run; `wall_time_secs` is the only field that differs
/// between two otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Every resolved parameter, defaults included.
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    /// Input path (as given) to its SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    /// `tuned`, `untuned`, or `n/a` for commands that fit nothing.
    pub tuning: String,
    /// Derived summary values, such as the rank estimate of a tune run.
    pub notes: BTreeMap<String, Value>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, argv: &[String]) -> Self {
        Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            params: BTreeMap::new(),
            seed: None,
            inputs: BTreeMap::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            tuning: "n/a".to_string(),
            notes: BTreeMap::new(),
            wall_time_secs: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.params.insert(key.to_string(), value);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(Value::Null);
        self.notes.insert(key.to_string(), value);
    }

    /// Records the digest of an input file.
    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            column: e.column(),
            message: e.to_string(),
        })
    }
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}
