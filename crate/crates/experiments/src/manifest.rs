use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VarianceScan,
    Train,
    Ablation,
    NoiseSweep,
    Tni,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::VarianceScan => "variance-scan",
            Self::Train => "train",
            Self::Ablation => "ablation",
            Self::NoiseSweep => "noise-sweep",
            Self::Tni => "tni",
        }
    }
}

/// Record of one run: enough to repeat it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    /// Fully resolved configuration, defaults included.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub code_version: String,
    /// Output files, relative to the run directory.
    pub outputs: Vec<PathBuf>,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: Command, config: &ExperimentConfig, outputs: Vec<PathBuf>, elapsed: Duration) -> Self {
        Self {
            command,
            config: config.clone(),
            seed: config.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
            duration_secs: elapsed.as_secs_f64(),
        }
    }

    pub fn save(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading manifest {}: {e}", path.display()))?;
        let manifest: Self = serde_json::from_str(&text)?;
        if manifest.seed != manifest.config.seed {
            anyhow::bail!(
                "manifest seed {} disagrees with its config seed {}",
                manifest.seed,
                manifest.config.seed
            );
        }
        Ok(manifest)
    }
}
