//! Experiment runner for the QCNN toolkit: variance scans, training,
//! initialization ablations, noise sweeps and tensor-network pre-training,
//! each a deterministic run that writes its outputs and a manifest into one
//! directory.

pub mod config;
pub mod manifest;
pub mod noise;
pub mod runs;
pub mod scan;

pub use config::{ConfigError, ExperimentConfig, InitKind, ScanInput};
pub use manifest::{Command, RunManifest, MANIFEST_FILE};

use std::fmt::Write as _;
use std::path::Path;

/// First line of every CSV this crate writes.
pub use qcnn_core::training::METRICS_SCHEMA as CSV_SCHEMA;

/// A finished run: its typed result and the manifest written beside it.
#[derive(Debug, Clone)]
pub struct Run<T> {
    pub result: T,
    pub manifest: RunManifest,
}

/// Independent stream seed derived from a run seed and a label.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Writes `header` and `rows` under the schema line.
pub(crate) fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> anyhow::Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{CSV_SCHEMA}");
    let _ = writeln!(out, "{header}");
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Runs `command` with `config`, writing into `out`.
pub fn run_command(command: Command, config: &ExperimentConfig, out: &Path) -> anyhow::Result<RunManifest> {
    Ok(match command {
        Command::VarianceScan => scan::variance_scan(config, out)?.manifest,
        Command::Train => runs::train(config, out)?.manifest,
        Command::Ablation => runs::ablation(config, out)?.manifest,
        Command::NoiseSweep => noise::noise_sweep(config, out)?.manifest,
        Command::Tni => runs::tni(config, out)?.manifest,
    })
}

/// Repeats the run recorded in a manifest, writing into `out`.
pub fn replay(manifest_path: &Path, out: &Path) -> anyhow::Result<RunManifest> {
    let m = RunManifest::load(manifest_path)?;
    run_command(m.command, &m.config, out)
}
