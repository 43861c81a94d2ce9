use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::gradient::batch_gradient_with;
use super::{
    adam_step, classify, evaluate, AdamHyper, CostKind, Differentiator, OptimizerState, QcnnModel,
};
use crate::circuit::{EncodedSample, ParameterVector};
use crate::error::{QcnnError, Result};
use crate::sim::NoiseConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub eta0: f64,
    pub gamma: f64,
    /// Steps per decay tier; `None` means one tier per epoch.
    pub decay_steps: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub cost_kind: CostKind,
    pub seed: u64,
    pub differentiator: Differentiator,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta0: 0.015,
            gamma: 0.9,
            decay_steps: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 150,
            cost_kind: CostKind::Local,
            seed: 0,
            differentiator: Differentiator::ParameterShift,
        }
    }
}

impl TrainConfig {
    pub fn batches_per_epoch(&self, train_len: usize) -> usize {
        train_len.div_ceil(self.batch_size.max(1))
    }

    pub fn hyper(&self, train_len: usize) -> AdamHyper {
        AdamHyper {
            eta0: self.eta0,
            gamma: self.gamma,
            decay_steps: self
                .decay_steps
                .unwrap_or_else(|| self.batches_per_epoch(train_len)),
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(QcnnError::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(QcnnError::Config("epochs must be at least 1".into()));
        }
        self.hyper(1).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean batch loss over the epoch, each batch evaluated before its update.
    pub train_loss: f64,
    pub val_loss: f64,
    /// Running accuracy over the epoch's batches.
    pub train_acc: f64,
    pub val_acc: f64,
    /// Mean L2 norm of the batch gradients.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub theta: ParameterVector,
    pub optimizer: OptimizerState,
}

pub fn train(
    config: &TrainConfig,
    model: &QcnnModel,
    train_set: &[EncodedSample],
    val_set: &[EncodedSample],
    theta_init: &ParameterVector,
) -> Result<TrainOutcome> {
    train_with_progress(config, model, train_set, val_set, theta_init, |_| {})
}

/// As [`train`], calling `on_epoch` after each epoch.
pub fn train_with_progress(
    config: &TrainConfig,
    model: &QcnnModel,
    train_set: &[EncodedSample],
    val_set: &[EncodedSample],
    theta_init: &ParameterVector,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(QcnnError::Empty("training set"));
    }
    if val_set.is_empty() {
        return Err(QcnnError::Empty("validation set"));
    }
    model.circuit().check_theta(theta_init)?;
    let hyper = config.hyper(train_set.len());
    let obs = model.observable(config.cost_kind);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = theta_init.clone();
    let mut opt = OptimizerState::new(theta.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut norm_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_set[i].clone()));
            let lg = batch_gradient_with(model, &obs, &theta, &batch, config.differentiator)?;
            loss_sum += lg.loss * batch.len() as f64;
            correct += batch
                .iter()
                .zip(&lg.scores)
                .filter(|(s, &score)| classify(score, 0.5) == s.label)
                .count();
            norm_sum += lg.gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
            batches += 1;
            adam_step(&mut opt, &mut theta.0, &lg.gradient, &hyper)?;
        }
        let val = evaluate(model, &theta, val_set, NoiseConfig::disabled(), config.cost_kind)?;
        let n = train_set.len() as f64;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            val_loss: val.loss,
            train_acc: correct as f64 / n,
            val_acc: val.accuracy,
            grad_norm: norm_sum / batches as f64,
        };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(TrainOutcome {
        metrics,
        theta,
        optimizer: opt,
    })
}

pub const METRICS_SCHEMA: &str = "# schema_version=1";
const METRICS_HEADER: &str = "epoch,train_loss,val_loss,train_acc,val_acc,grad_norm";

pub fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{METRICS_SCHEMA}")?;
    writeln!(out, "{METRICS_HEADER}")?;
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            m.epoch, m.train_loss, m.val_loss, m.train_acc, m.val_acc, m.grad_norm
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |msg: String| QcnnError::Config(format!("{}: {msg}", path.display()));
    if lines.next() != Some(METRICS_SCHEMA) {
        return Err(bad("missing or unknown schema line".into()));
    }
    if lines.next() != Some(METRICS_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("line {}: expected 6 fields", i + 3)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 3)));
        out.push(EpochMetrics {
            epoch: f[0].parse().map_err(|e| bad(format!("line {}: {e}", i + 3)))?,
            train_loss: num(f[1])?,
            val_loss: num(f[2])?,
            train_acc: num(f[3])?,
            val_acc: num(f[4])?,
            grad_norm: num(f[5])?,
        });
    }
    Ok(out)
}

/// Parameters keyed by symbol index, with optional optimizer state and the
/// configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub theta: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_kind: Option<CostKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn new(theta: &ParameterVector) -> Self {
        Self {
            theta: theta.as_slice().iter().copied().enumerate().collect(),
            optimizer: None,
            cost_kind: None,
            source: None,
        }
    }

    pub fn theta_vector(&self) -> Result<ParameterVector> {
        let values: Vec<f64> = self.theta.values().copied().collect();
        if self.theta.keys().enumerate().any(|(i, &k)| i != k) {
            return Err(QcnnError::Config(
                "checkpoint symbol indices are not contiguous from 0".into(),
            ));
        }
        Ok(values.into())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
