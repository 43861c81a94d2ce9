//! Accuracy of a fixed checkpoint under depolarizing noise.

use anyhow::{bail, Context};
use qcnn_core::circuit::{EncodedSample, ParameterVector, RunOutput};
use qcnn_core::sim::{NoiseConfig, MAX_DEPOLARIZING};
use qcnn_core::training::{classify, cost, evaluate, Checkpoint, CostKind, QcnnModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::ExperimentConfig;
use crate::manifest::{Command, RunManifest};
use crate::runs::{build_model, prepare_data, SUMMARY_FILE};
use crate::{write_csv, write_json, Run};

pub const NOISE_FILE: &str = "noise.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub p: f64,
    pub accuracy: f64,
    pub mean_score: f64,
    /// Largest `|tr ρ − 1|` over the evaluated outputs.
    pub max_trace_error: f64,
    /// Smallest eigenvalue over the evaluated outputs.
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummary {
    pub cost_kind: CostKind,
    pub noiseless_accuracy: f64,
    pub noiseless_mean_score: f64,
    pub rows: Vec<NoiseRow>,
}

/// Evaluates `samples` through the density-matrix path at level `p`.
pub fn density_evaluation(
    model: &QcnnModel,
    theta: &ParameterVector,
    samples: &[EncodedSample],
    kind: CostKind,
    p: f64,
) -> anyhow::Result<NoiseRow> {
    let noise = NoiseConfig::depolarizing(p)?;
    let per_sample: Vec<(f64, u8, f64, f64)> = samples
        .par_iter()
        .map(|s| {
            let out = model.circuit().bind_and_run(theta, s, noise)?;
            let score = cost(kind, &out, model.survivors())?;
            let RunOutput::Mixed(rho) = &out else {
                bail!("noisy evaluation returned a pure state");
            };
            let tr = rho.trace();
            Ok((score, s.label, (tr.re - 1.0).abs().max(tr.im.abs()), rho.min_eigenvalue()))
        })
        .collect::<anyhow::Result<_>>()?;
    let n = samples.len() as f64;
    let correct = per_sample.iter().filter(|(score, label, ..)| classify(*score, 0.5) == *label).count();
    Ok(NoiseRow {
        p,
        accuracy: correct as f64 / n,
        mean_score: per_sample.iter().map(|r| r.0).sum::<f64>() / n,
        max_trace_error: per_sample.iter().map(|r| r.2).fold(0.0, f64::max),
        min_eigenvalue: per_sample.iter().map(|r| r.3).fold(f64::INFINITY, f64::min),
    })
}

pub fn noise_sweep(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Run<NoiseSummary>> {
    let start = Instant::now();
    if cfg.noise_levels.is_empty() {
        bail!("noise_levels is empty");
    }
    if let Some(p) = cfg.noise_levels.iter().find(|p| !(0.0..=MAX_DEPOLARIZING).contains(*p)) {
        bail!("noise level {p} outside [0, {MAX_DEPOLARIZING}]");
    }
    let path = cfg.checkpoint.as_ref().context("noise-sweep needs a trained checkpoint")?;
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    let theta = ckpt.theta_vector()?;
    let mut cfg = cfg.clone();
    let data = prepare_data(&mut cfg)?;
    let model = build_model(&cfg)?;
    model.circuit().check_theta(&theta)?;
    let kind = ckpt.cost_kind.unwrap_or(cfg.observables);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let clean = evaluate(&model, &theta, &data.test, NoiseConfig::disabled(), kind)?;
    let rows = cfg
        .noise_levels
        .iter()
        .map(|&p| density_evaluation(&model, &theta, &data.test, kind, p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    write_csv(
        &out.join(NOISE_FILE),
        "p,accuracy,mean_score",
        rows.iter().map(|r| format!("{},{},{}", r.p, r.accuracy, r.mean_score)),
    )?;
    let summary = NoiseSummary {
        cost_kind: kind,
        noiseless_accuracy: clean.accuracy,
        noiseless_mean_score: clean.mean_score,
        rows,
    };
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    let outputs = [NOISE_FILE, SUMMARY_FILE].map(PathBuf::from).to_vec();
    let manifest = RunManifest::new(Command::NoiseSweep, &cfg, outputs, start.elapsed());
    manifest.save(out)?;
    Ok(Run { result: summary, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use qcnn_core::circuit::{amplitude_encode, build_qcnn, StageSchedule};

    fn toy() -> (QcnnModel, ParameterVector, Vec<EncodedSample>) {
        let (plan, _) = build_qcnn(4, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let model = QcnnModel::new(plan).unwrap();
        let theta: ParameterVector = (0..model.num_parameters()).map(|i| 0.3 * i as f64).collect::<Vec<_>>().into();
        let samples = (0..6)
            .map(|i| amplitude_encode(&[1.0, i as f64, 0.5, 2.0, 0.1 * i as f64], 4).unwrap().with_label((i % 2) as u8))
            .collect();
        (model, theta, samples)
    }

    #[test]
    fn zero_noise_matches_pure_path() {
        let (model, theta, samples) = toy();
        let row = density_evaluation(&model, &theta, &samples, CostKind::Local, 0.0).unwrap();
        let clean = evaluate(&model, &theta, &samples, NoiseConfig::disabled(), CostKind::Local).unwrap();
        assert_eq!(row.accuracy, clean.accuracy);
        assert!((row.mean_score - clean.mean_score).abs() < 1e-12);
        assert!(row.max_trace_error < 1e-12);
        assert!(row.min_eigenvalue > -1e-10);
    }

    #[test]
    fn full_noise_pushes_scores_to_half() {
        let (model, theta, samples) = toy();
        let row = density_evaluation(&model, &theta, &samples, CostKind::Local, MAX_DEPOLARIZING).unwrap();
        assert!(row.max_trace_error < 1e-12);
        assert!(row.min_eigenvalue > -1e-10);
        assert!((row.mean_score - 0.5).abs() < 0.2, "{}", row.mean_score);
    }

    #[test]
    fn sweep_requires_checkpoint_and_valid_levels() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        let err = noise_sweep(&cfg, dir.path()).unwrap_err();
        assert!(err.to_string().contains("checkpoint"), "{err}");
        let mut cfg = ExperimentConfig::default();
        cfg.noise_levels = vec![0.0, 0.8];
        assert!(noise_sweep(&cfg, dir.path()).is_err());
    }
}
