//! Run manifests: the resolved configuration of a command plus a SHA-256 of
//! every file it wrote, enough to re-run it and check the outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// File name inside the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub generator: String,
    pub artifacts: Vec<Artifact>,
}

pub fn file_name(command: &str) -> String {
    format!("{command}.manifest.json")
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, out_dir: &Path, files: &[String]) -> CliResult<Self> {
        let mut artifacts = files
            .iter()
            .map(|name| {
                Ok(Artifact {
                    path: name.clone(),
                    sha256: sha256_file(&out_dir.join(name))?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Self {
            schema: SCHEMA,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            generator: optcast_core::rng::GENERATOR_ID.to_string(),
            artifacts,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a manifest: {e}", path.display())))?;
        if manifest.schema != SCHEMA {
            return Err(CliError::Usage(format!(
                "{}: unsupported manifest schema {}",
                path.display(),
                manifest.schema
            )));
        }
        Ok(manifest)
    }
}
