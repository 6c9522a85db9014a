use std::fs;
use std::path::{Path, PathBuf};

use mpmqir_core::ansatz::AnsatzKind;
use mpmqir_core::optimize::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliResult;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ansatz: AnsatzKind,
    pub num_qubits: usize,
    pub layers: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub n_theta: usize,
}

/// Everything needed to reproduce a run. `args` is the fully expanded
/// argument list (config file entries included); `train_config` holds the
/// resolved optimizer settings with defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub train_config: Option<TrainConfig>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub dataset: Option<serde_json::Value>,
    pub geometry: Option<Geometry>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: args.to_vec(),
            train_config: None,
            seed: None,
            inputs: Vec::new(),
            dataset: None,
            geometry: None,
            outputs: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            mpmqir_core::Error::Parse {
                offset: 0,
                message: format!("manifest {}: {e}", path.display()),
            }
            .into()
        })
    }
}

/// `dir/stem.<suffix>` next to `path`, replacing its extension.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}
