//! Gradient-variance scan over qubit counts.
//!
//! Each `n` uses a single stage of convolution followed by pooling of one
//! adjacent pair, so every size has the same symbol layout. For each sample
//! the angles are drawn uniformly from `[0, 2π)` and the derivative of both
//! costs with respect to the first convolution symbol is taken by the shift
//! rule, sharing the shifted circuit runs between the two costs.

use anyhow::{bail, Context};
use num_complex::Complex64 as C64;
use qcnn_core::circuit::{build_qcnn, ParameterVector, StageSchedule};
use qcnn_core::sim::StateVector;
use qcnn_core::training::{symbol_shift_derivatives, CostKind, QcnnModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{ExperimentConfig, ScanInput};
use crate::manifest::{Command, RunManifest};
use crate::{derive_seed, write_csv, Run};

pub const SCAN_FILE: &str = "variance.csv";
pub const MAX_SCAN_QUBITS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub n: usize,
    pub cost_kind: CostKind,
    pub variance: f64,
    pub samples: usize,
}

/// Qubit counts covered by the configured range.
pub fn scan_sizes(cfg: &ExperimentConfig) -> anyhow::Result<Vec<usize>> {
    let (lo, hi) = (cfg.scan_n_min, cfg.scan_n_max);
    if !(2 <= lo && lo <= hi && hi <= MAX_SCAN_QUBITS) {
        bail!("scan range requires 2 <= n_min <= n_max <= {MAX_SCAN_QUBITS}, got {lo}..={hi}");
    }
    if cfg.scan_n_step == 0 {
        bail!("scan_n_step must be at least 1");
    }
    if cfg.scan_samples == 0 {
        bail!("scan_samples must be at least 1");
    }
    Ok((lo..=hi).step_by(cfg.scan_n_step).collect())
}

fn haar_qubit(rng: &mut impl Rng) -> [C64; 2] {
    let cos_t: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    let half = cos_t.acos() / 2.0;
    [C64::new(half.cos(), 0.0), C64::from_polar(half.sin(), phi)]
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Derivative samples `(global, local)` for one qubit count.
pub fn scan_derivatives(n: usize, samples: usize, input: ScanInput, seed: u64) -> anyhow::Result<Vec<(f64, f64)>> {
    let (plan, _) = build_qcnn(n, &StageSchedule::Survivors(vec![n - 1]))?;
    let model = QcnnModel::new(plan)?;
    let symbol = model.plan().first_conv_symbols()[0];
    let global = model.observable(CostKind::Global);
    let local = model.observable(CostKind::Local);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("scan/{n}/{i}")));
            let theta: ParameterVector = (0..model.num_parameters())
                .map(|_| rng.gen_range(0.0..TAU))
                .collect::<Vec<_>>()
                .into();
            let psi = match input {
                ScanInput::Zero => StateVector::new_zero(n)?,
                ScanInput::Product => {
                    let qubits: Vec<[C64; 2]> = (0..n).map(|_| haar_qubit(&mut rng)).collect();
                    StateVector::product(&qubits)?
                }
            };
            let d = symbol_shift_derivatives(model.circuit(), &theta, &psi, &[&global, &local], symbol)?;
            Ok((d[0], d[1]))
        })
        .collect()
}

pub fn variance_scan(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Run<Vec<VarianceRow>>> {
    let start = Instant::now();
    let sizes = scan_sizes(cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows = Vec::with_capacity(2 * sizes.len());
    for &n in &sizes {
        let d = scan_derivatives(n, cfg.scan_samples, cfg.scan_input, cfg.seed)?;
        let (g, l): (Vec<f64>, Vec<f64>) = d.into_iter().unzip();
        for (kind, xs) in [(CostKind::Global, g), (CostKind::Local, l)] {
            rows.push(VarianceRow {
                n,
                cost_kind: kind,
                variance: sample_variance(&xs),
                samples: cfg.scan_samples,
            });
        }
    }
    write_csv(
        &out.join(SCAN_FILE),
        "n,cost_kind,variance,samples",
        rows.iter()
            .map(|r| format!("{},{},{},{}", r.n, r.cost_kind, r.variance, r.samples)),
    )?;
    let manifest = RunManifest::new(Command::VarianceScan, cfg, vec![PathBuf::from(SCAN_FILE)], start.elapsed());
    manifest.save(out)?;
    Ok(Run { result: rows, manifest })
}
