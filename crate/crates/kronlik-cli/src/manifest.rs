//! Run manifests: enough provenance to reproduce any result.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Provenance record emitted alongside every result. Deterministic commands
/// rerun from the same manifest reproduce their outputs byte-identically;
/// everything here is derived from inputs only (no timestamps).
#[derive(Debug, Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    config: BTreeMap<String, serde_json::Value>,
    /// Input path -> sha256 of its bytes.
    inputs: BTreeMap<String, String>,
    /// Output path -> sha256 of the written bytes.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: Option<u64>) -> Self {
        Self {
            tool: "kronlik",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn config<V: Serialize>(&mut self, key: &str, value: V) {
        self.config.insert(
            key.to_string(),
            serde_json::to_value(value).expect("config values are plain scalars"),
        );
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.inputs
            .insert(path.display().to_string(), digest(&bytes));
        Ok(())
    }

    pub fn with_output(mut self, path: &Path, contents: &str) -> Self {
        self.outputs
            .insert(path.display().to_string(), digest(contents.as_bytes()));
        self
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string(self).map_err(|e| CliError::Io(format!("manifest: {e}")))
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
