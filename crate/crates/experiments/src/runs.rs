//! Data preparation, training, pre-training and the initialization ablation.

use anyhow::{bail, Context};
use qcnn_core::circuit::{build_qcnn, EncodedSample, ParameterVector};
use qcnn_core::data::{load_train_dir, make_binary, resolve_data_dir, split, BinaryDataset};
use qcnn_core::sim::NoiseConfig;
use qcnn_core::tni::tni_pretrain_with_history;
use qcnn_core::training::{
    evaluate, train as train_model, write_metrics_csv, Checkpoint, EpochMetrics, Evaluation, QcnnModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{ExperimentConfig, InitKind};
use crate::manifest::{Command, RunManifest};
use crate::{derive_seed, write_csv, write_json, Run};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const PLAN_FILE: &str = "plan.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TNI_SEED_FILE: &str = "tni_seed.json";
pub const TNI_LOSS_FILE: &str = "tni_losses.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

/// Epochs averaged for the reported terminal gradient norm.
pub const TAIL_EPOCHS: usize = 10;

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<EncodedSample>,
    pub val: Vec<EncodedSample>,
    pub test: Vec<EncodedSample>,
}

/// Resolves the data directory into `cfg` and builds the configured
/// train/validation/test partition.
pub fn prepare_data(cfg: &mut ExperimentConfig) -> anyhow::Result<Splits> {
    cfg.validate_data().map_err(anyhow::Error::msg)?;
    let dir = resolve_data_dir(cfg.data_dir.as_deref())?;
    let raw = load_train_dir(&dir).with_context(|| format!("loading dataset from {}", dir.display()))?;
    cfg.data_dir = Some(dir);
    let all = make_binary(&raw, cfg.class_a, cfg.class_b, cfg.qubits, derive_seed(cfg.seed, "data"))?;
    if all.len() < cfg.dataset_size {
        bail!(
            "dataset_size {} exceeds the {} available samples of digits {} and {}",
            cfg.dataset_size,
            all.len(),
            cfg.class_a,
            cfg.class_b
        );
    }
    let ds = all.take(cfg.dataset_size);
    let total = cfg.dataset_size as f64;
    let fractions = (
        cfg.train_size as f64 / total,
        cfg.val_size as f64 / total,
        cfg.test_size as f64 / total,
    );
    let [train, val, test]: [BinaryDataset; 3] = split(&ds, fractions)?;
    let got = [train.len(), val.len(), test.len()];
    if got != [cfg.train_size, cfg.val_size, cfg.test_size] {
        bail!("split produced sizes {got:?}, requested {}/{}/{}", cfg.train_size, cfg.val_size, cfg.test_size);
    }
    Ok(Splits {
        train: train.samples,
        val: val.samples,
        test: test.samples,
    })
}

pub fn build_model(cfg: &ExperimentConfig) -> anyhow::Result<QcnnModel> {
    let (plan, _) = build_qcnn(cfg.qubits, &cfg.pooling_schedule)?;
    Ok(QcnnModel::new(plan)?)
}

/// Starting angles and, for tensor-network starts, the pre-training losses.
pub fn initial_theta(
    cfg: &ExperimentConfig,
    model: &QcnnModel,
    init: InitKind,
    train: &[EncodedSample],
    seed: u64,
) -> anyhow::Result<(ParameterVector, Vec<f64>)> {
    match init {
        InitKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "init"));
            let theta: Vec<f64> = (0..model.num_parameters()).map(|_| rng.gen_range(0.0..TAU)).collect();
            Ok((theta.into(), Vec::new()))
        }
        InitKind::Tni => {
            let out = tni_pretrain_with_history(train, model.plan(), &cfg.tni_config(derive_seed(seed, "tni")))?;
            Ok((out.theta, out.losses))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub init: InitKind,
    pub num_parameters: usize,
    pub epochs: usize,
    pub first_epoch_loss: f64,
    pub final_val_acc: f64,
    /// Mean per-epoch gradient norm over the last epochs.
    pub tail_grad_norm: f64,
    pub test: Evaluation,
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub summary: FitSummary,
    pub metrics: Vec<EpochMetrics>,
    pub theta: ParameterVector,
    pub checkpoint: Checkpoint,
    pub tni_losses: Vec<f64>,
}

fn tail_mean(metrics: &[EpochMetrics]) -> f64 {
    let tail = &metrics[metrics.len().saturating_sub(TAIL_EPOCHS)..];
    tail.iter().map(|m| m.grad_norm).sum::<f64>() / tail.len().max(1) as f64
}

/// Initialization, training and test evaluation with one seed.
pub fn fit(
    cfg: &ExperimentConfig,
    model: &QcnnModel,
    data: &Splits,
    init: InitKind,
    epochs: usize,
    seed: u64,
) -> anyhow::Result<Fit> {
    let (theta0, tni_losses) = initial_theta(cfg, model, init, &data.train, seed)?;
    let mut tc = cfg.train_config(derive_seed(seed, "shuffle"));
    tc.epochs = epochs;
    let out = train_model(&tc, model, &data.train, &data.val, &theta0)?;
    let test = evaluate(model, &out.theta, &data.test, NoiseConfig::disabled(), cfg.observables)?;
    let last = out.metrics.last().context("training produced no epochs")?;
    let summary = FitSummary {
        init,
        num_parameters: model.num_parameters(),
        epochs,
        first_epoch_loss: out.metrics[0].train_loss,
        final_val_acc: last.val_acc,
        tail_grad_norm: tail_mean(&out.metrics),
        test,
    };
    let mut checkpoint = Checkpoint::new(&out.theta);
    checkpoint.optimizer = Some(out.optimizer);
    checkpoint.cost_kind = Some(cfg.observables);
    checkpoint.source = Some(serde_json::to_value(cfg)?);
    Ok(Fit {
        summary,
        metrics: out.metrics,
        theta: out.theta,
        checkpoint,
        tni_losses,
    })
}

fn write_tni_losses(path: &Path, losses: &[f64]) -> anyhow::Result<()> {
    write_csv(
        path,
        "iteration,pseudo_loss",
        losses.iter().enumerate().map(|(i, l)| format!("{},{l}", i + 1)),
    )
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Run<Fit>> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.train_config(0).validate()?;
    let data = prepare_data(&mut cfg)?;
    let model = build_model(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let fit = fit(&cfg, &model, &data, cfg.init, cfg.training_epochs, cfg.seed)?;

    let mut outputs = vec![METRICS_FILE, CHECKPOINT_FILE, PLAN_FILE, SUMMARY_FILE];
    write_metrics_csv(&out.join(METRICS_FILE), &fit.metrics)?;
    fit.checkpoint.save(&out.join(CHECKPOINT_FILE))?;
    std::fs::write(out.join(PLAN_FILE), model.plan().to_json()? + "\n")?;
    write_json(&out.join(SUMMARY_FILE), &fit.summary)?;
    if cfg.init == InitKind::Tni {
        write_tni_losses(&out.join(TNI_LOSS_FILE), &fit.tni_losses)?;
        outputs.push(TNI_LOSS_FILE);
    }
    let manifest = RunManifest::new(Command::Train, &cfg, outputs.into_iter().map(PathBuf::from).collect(), start.elapsed());
    manifest.save(out)?;
    Ok(Run { result: fit, manifest })
}

#[derive(Debug, Clone)]
pub struct TniRun {
    pub theta: ParameterVector,
    pub losses: Vec<f64>,
}

pub fn tni(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Run<TniRun>> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    let data = prepare_data(&mut cfg)?;
    let model = build_model(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (theta, losses) = initial_theta(&cfg, &model, InitKind::Tni, &data.train, cfg.seed)?;
    let mut seed_ckpt = Checkpoint::new(&theta);
    seed_ckpt.source = Some(serde_json::to_value(cfg.tni_config(derive_seed(cfg.seed, "tni")))?);
    seed_ckpt.save(&out.join(TNI_SEED_FILE))?;
    write_tni_losses(&out.join(TNI_LOSS_FILE), &losses)?;
    let outputs = [TNI_SEED_FILE, TNI_LOSS_FILE].map(PathBuf::from).to_vec();
    let manifest = RunManifest::new(Command::Tni, &cfg, outputs, start.elapsed());
    manifest.save(out)?;
    Ok(Run {
        result: TniRun { theta, losses },
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTrial {
    pub trial: usize,
    pub trial_seed: u64,
    pub tni: FitSummary,
    pub random: FitSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub num_seeds: usize,
    pub epochs: usize,
    pub median_first_epoch_loss_tni: f64,
    pub median_first_epoch_loss_random: f64,
    /// Median over seeds of `(random − tni) / random` first-epoch loss.
    pub median_relative_reduction: f64,
    pub premature_threshold: f64,
    /// Fraction of runs ending below `premature_threshold` validation accuracy.
    pub premature_fraction_random: f64,
    pub premature_fraction_tni: f64,
    pub trials: Vec<AblationTrial>,
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Paired runs per seed: the two arms share data, shuffling and budget and
/// differ only in their starting angles.
pub fn ablation(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Run<AblationSummary>> {
    let start = Instant::now();
    if cfg.ablation_seeds < 3 {
        bail!("ablation needs at least 3 seeds, got {}", cfg.ablation_seeds);
    }
    let epochs = cfg.ablation_epochs.unwrap_or(cfg.training_epochs);
    let mut cfg = cfg.clone();
    cfg.train_config(0).validate()?;
    let data = prepare_data(&mut cfg)?;
    let model = build_model(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let trials: Vec<AblationTrial> = (0..cfg.ablation_seeds)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(cfg.seed, &format!("trial-{trial}"));
            let tni = fit(&cfg, &model, &data, InitKind::Tni, epochs, trial_seed)?.summary;
            let random = fit(&cfg, &model, &data, InitKind::Random, epochs, trial_seed)?.summary;
            Ok(AblationTrial {
                trial,
                trial_seed,
                tni,
                random,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let first = |f: fn(&AblationTrial) -> &FitSummary| -> Vec<f64> {
        trials.iter().map(|t| f(t).first_epoch_loss).collect()
    };
    let premature = |f: fn(&AblationTrial) -> &FitSummary| -> f64 {
        trials.iter().filter(|t| f(t).final_val_acc < cfg.premature_threshold).count() as f64 / trials.len() as f64
    };
    let reductions: Vec<f64> = trials
        .iter()
        .map(|t| (t.random.first_epoch_loss - t.tni.first_epoch_loss) / t.random.first_epoch_loss)
        .collect();
    let summary = AblationSummary {
        num_seeds: cfg.ablation_seeds,
        epochs,
        median_first_epoch_loss_tni: median(&first(|t| &t.tni)),
        median_first_epoch_loss_random: median(&first(|t| &t.random)),
        median_relative_reduction: median(&reductions),
        premature_threshold: cfg.premature_threshold,
        premature_fraction_random: premature(|t| &t.random),
        premature_fraction_tni: premature(|t| &t.tni),
        trials,
    };

    write_csv(
        &out.join(ABLATION_FILE),
        "trial,trial_seed,arm,first_epoch_loss,final_val_acc,test_accuracy",
        summary.trials.iter().flat_map(|t| {
            [("tni", &t.tni), ("random", &t.random)].map(|(arm, s)| {
                format!(
                    "{},{},{arm},{},{},{}",
                    t.trial, t.trial_seed, s.first_epoch_loss, s.final_val_acc, s.test.accuracy
                )
            })
        }),
    )?;
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    let outputs = [ABLATION_FILE, SUMMARY_FILE].map(PathBuf::from).to_vec();
    let manifest = RunManifest::new(Command::Ablation, &cfg, outputs, start.elapsed());
    manifest.save(out)?;
    Ok(Run { result: summary, manifest })
}
