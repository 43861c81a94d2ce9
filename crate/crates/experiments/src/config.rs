//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Keys are named after the
//! training hyperparameters; every key has a default, so an empty file is
//! a valid configuration. Command-line overrides go through the same
//! [`ExperimentConfig::set`] so they are validated identically.

use qcnn_core::circuit::StageSchedule;
use qcnn_core::training::{CostKind, Differentiator, TrainConfig};
use qcnn_core::tni::TniConfig;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Tensor-network pre-training.
    Tni,
    /// Uniform on `[0, 2π)`.
    Random,
}

impl FromStr for InitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tni" => Ok(Self::Tni),
            "random" | "uniform" => Ok(Self::Random),
            other => Err(format!("unknown init {other:?} (expected tni or random)")),
        }
    }
}

impl std::fmt::Display for InitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Tni => "tni",
            Self::Random => "random",
        })
    }
}

/// Input state of the variance scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanInput {
    /// `|0…0⟩`.
    Zero,
    /// A fresh Haar-random single-qubit state on every qubit per sample.
    Product,
}

impl FromStr for ScanInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(Self::Zero),
            "product" => Ok(Self::Product),
            other => Err(format!("unknown scan input {other:?} (expected zero or product)")),
        }
    }
}

impl std::fmt::Display for ScanInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Product => "product",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub qubits: usize,
    pub pooling_schedule: StageSchedule,
    pub class_a: u8,
    pub class_b: u8,
    pub dataset_size: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub observables: CostKind,
    pub init: InitKind,
    pub differentiator: Differentiator,
    pub initial_learning_rate: f64,
    pub exponential_decay: f64,
    /// Optimizer steps per decay tier; `None` means one tier per epoch.
    pub decay_steps: Option<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub training_epochs: usize,
    pub tni_bond_dimension: usize,
    pub tni_data_bond_dimension: usize,
    pub tni_pretrain_iterations: usize,
    pub tni_subset_size: usize,
    pub tni_batch_size: usize,
    pub tni_learning_rate: f64,
    pub tni_init_stddev: f64,
    pub scan_n_min: usize,
    pub scan_n_max: usize,
    pub scan_n_step: usize,
    pub scan_samples: usize,
    pub scan_input: ScanInput,
    pub ablation_seeds: usize,
    /// Epoch budget per ablation arm; `None` uses `training_epochs`.
    pub ablation_epochs: Option<usize>,
    /// Random-init runs finishing below this validation accuracy count as
    /// premature convergence.
    pub premature_threshold: f64,
    pub noise_levels: Vec<f64>,
    pub checkpoint: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let tni = TniConfig::default();
        Self {
            seed: 0,
            qubits: 10,
            pooling_schedule: StageSchedule::Survivors(vec![9, 8, 7, 6, 5]),
            class_a: 0,
            class_b: 7,
            dataset_size: 1400,
            train_size: 1000,
            val_size: 200,
            test_size: 200,
            observables: train.cost_kind,
            init: InitKind::Tni,
            differentiator: train.differentiator,
            initial_learning_rate: train.eta0,
            exponential_decay: train.gamma,
            decay_steps: train.decay_steps,
            adam_beta1: train.beta1,
            adam_beta2: train.beta2,
            adam_epsilon: train.epsilon,
            batch_size: train.batch_size,
            training_epochs: train.epochs,
            tni_bond_dimension: tni.chi,
            tni_data_bond_dimension: tni.chi_data,
            tni_pretrain_iterations: tni.iterations,
            tni_subset_size: tni.subset_size,
            tni_batch_size: tni.batch_size,
            tni_learning_rate: tni.learning_rate,
            tni_init_stddev: tni.init_stddev,
            scan_n_min: 4,
            scan_n_max: 12,
            scan_n_step: 2,
            scan_samples: 200,
            scan_input: ScanInput::Product,
            ablation_seeds: 5,
            ablation_epochs: None,
            premature_threshold: 0.9,
            noise_levels: vec![0.0, 0.005, 0.01, 0.02, 0.05],
            checkpoint: None,
            data_dir: None,
        }
    }
}

/// Problem found while reading a config, with its source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{origin}:{line}: {message}")]
pub struct ConfigError {
    pub origin: String,
    pub line: usize,
    pub message: String,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match value {
        "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect()
}

fn parse_schedule(value: &str) -> Result<StageSchedule, String> {
    if let Some(rest) = value.strip_prefix("halving") {
        let terminal = match rest.strip_prefix(':') {
            Some(t) => parse("pooling_schedule", t)?,
            None if rest.is_empty() => 1,
            None => return Err(format!("invalid pooling_schedule {value:?}")),
        };
        return Ok(StageSchedule::Halving { terminal });
    }
    parse_list("pooling_schedule", value).map(StageSchedule::Survivors)
}

fn schedule_text(s: &StageSchedule) -> String {
    match s {
        StageSchedule::Halving { terminal } => format!("halving:{terminal}"),
        StageSchedule::Survivors(v) => join(v),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn optional_text<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".into(), T::to_string)
}

impl ExperimentConfig {
    /// Assigns one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "qubits" => self.qubits = parse(key, v)?,
            "amplitude_padding_length" => {
                let len: usize = parse(key, v)?;
                if !len.is_power_of_two() || len < 2 {
                    return Err(format!("amplitude_padding_length {len} is not a power of two"));
                }
                self.qubits = len.trailing_zeros() as usize;
            }
            "pooling_schedule" => self.pooling_schedule = parse_schedule(v)?,
            "class_a" => self.class_a = parse(key, v)?,
            "class_b" => self.class_b = parse(key, v)?,
            "dataset_size" => self.dataset_size = parse(key, v)?,
            "train_size" => self.train_size = parse(key, v)?,
            "val_size" => self.val_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "observables" => self.observables = parse(key, v)?,
            "init" => self.init = parse(key, v)?,
            "differentiator" => self.differentiator = parse(key, v)?,
            "initial_learning_rate" => self.initial_learning_rate = parse(key, v)?,
            "exponential_decay" => self.exponential_decay = parse(key, v)?,
            "decay_steps" => self.decay_steps = parse_optional(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse(key, v)?,
            "adam_epsilon" => self.adam_epsilon = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "training_epochs" => self.training_epochs = parse(key, v)?,
            "tni_bond_dimension" => self.tni_bond_dimension = parse(key, v)?,
            "tni_data_bond_dimension" => self.tni_data_bond_dimension = parse(key, v)?,
            "tni_pretrain_iterations" => self.tni_pretrain_iterations = parse(key, v)?,
            "tni_subset_size" => self.tni_subset_size = parse(key, v)?,
            "tni_batch_size" => self.tni_batch_size = parse(key, v)?,
            "tni_learning_rate" => self.tni_learning_rate = parse(key, v)?,
            "tni_init_stddev" => self.tni_init_stddev = parse(key, v)?,
            "scan_n_min" => self.scan_n_min = parse(key, v)?,
            "scan_n_max" => self.scan_n_max = parse(key, v)?,
            "scan_n_step" => self.scan_n_step = parse(key, v)?,
            "scan_samples" => self.scan_samples = parse(key, v)?,
            "scan_input" => self.scan_input = parse(key, v)?,
            "ablation_seeds" => self.ablation_seeds = parse(key, v)?,
            "ablation_epochs" => self.ablation_epochs = parse_optional(key, v)?,
            "premature_threshold" => self.premature_threshold = parse(key, v)?,
            "noise_levels" => self.noise_levels = parse_list(key, v)?,
            "checkpoint" => self.checkpoint = path_value(v),
            "data_dir" => self.data_dir = path_value(v),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Applies `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ConfigError {
                origin: origin.to_string(),
                line,
                message,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(format!("expected `key = value`, found {content:?}")));
            };
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(err(format!("duplicate key {key:?} (first set on line {first})")));
            }
            self.set(key, value).map_err(err)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
        Ok(Self::from_text(&text, &path.display().to_string())?)
    }

    /// Every key with its value, in the same format [`Self::from_text`] reads.
    pub fn to_text(&self) -> String {
        let entries: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("qubits", self.qubits.to_string()),
            ("pooling_schedule", schedule_text(&self.pooling_schedule)),
            ("class_a", self.class_a.to_string()),
            ("class_b", self.class_b.to_string()),
            ("dataset_size", self.dataset_size.to_string()),
            ("train_size", self.train_size.to_string()),
            ("val_size", self.val_size.to_string()),
            ("test_size", self.test_size.to_string()),
            ("observables", self.observables.to_string()),
            ("init", self.init.to_string()),
            ("differentiator", self.differentiator.to_string()),
            ("initial_learning_rate", self.initial_learning_rate.to_string()),
            ("exponential_decay", self.exponential_decay.to_string()),
            ("decay_steps", optional_text(&self.decay_steps)),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_epsilon", self.adam_epsilon.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("training_epochs", self.training_epochs.to_string()),
            ("tni_bond_dimension", self.tni_bond_dimension.to_string()),
            ("tni_data_bond_dimension", self.tni_data_bond_dimension.to_string()),
            ("tni_pretrain_iterations", self.tni_pretrain_iterations.to_string()),
            ("tni_subset_size", self.tni_subset_size.to_string()),
            ("tni_batch_size", self.tni_batch_size.to_string()),
            ("tni_learning_rate", self.tni_learning_rate.to_string()),
            ("tni_init_stddev", self.tni_init_stddev.to_string()),
            ("scan_n_min", self.scan_n_min.to_string()),
            ("scan_n_max", self.scan_n_max.to_string()),
            ("scan_n_step", self.scan_n_step.to_string()),
            ("scan_samples", self.scan_samples.to_string()),
            ("scan_input", self.scan_input.to_string()),
            ("ablation_seeds", self.ablation_seeds.to_string()),
            ("ablation_epochs", optional_text(&self.ablation_epochs)),
            ("premature_threshold", self.premature_threshold.to_string()),
            ("noise_levels", join(&self.noise_levels)),
            ("checkpoint", path_text(&self.checkpoint)),
            ("data_dir", path_text(&self.data_dir)),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            eta0: self.initial_learning_rate,
            gamma: self.exponential_decay,
            decay_steps: self.decay_steps,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
            batch_size: self.batch_size,
            epochs: self.training_epochs,
            cost_kind: self.observables,
            seed,
            differentiator: self.differentiator,
        }
    }

    pub fn tni_config(&self, seed: u64) -> TniConfig {
        TniConfig {
            chi: self.tni_bond_dimension,
            chi_data: self.tni_data_bond_dimension,
            iterations: self.tni_pretrain_iterations,
            subset_size: self.tni_subset_size,
            init_stddev: self.tni_init_stddev,
            seed,
            batch_size: self.tni_batch_size,
            learning_rate: self.tni_learning_rate,
        }
    }

    /// Checks cross-field constraints shared by the data-driven commands.
    pub fn validate_data(&self) -> Result<(), String> {
        if self.class_a > 9 || self.class_b > 9 || self.class_a == self.class_b {
            return Err(format!(
                "class pair ({}, {}) must be two distinct digits",
                self.class_a, self.class_b
            ));
        }
        let parts = self.train_size + self.val_size + self.test_size;
        if parts != self.dataset_size {
            return Err(format!(
                "train_size + val_size + test_size = {parts}, dataset_size = {}",
                self.dataset_size
            ));
        }
        if self.train_size == 0 || self.val_size == 0 || self.test_size == 0 {
            return Err("every split needs at least one sample".into());
        }
        Ok(())
    }
}

fn path_value(v: &str) -> Option<PathBuf> {
    match v {
        "" | "none" => None,
        p => Some(PathBuf::from(p)),
    }
}

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())
}
