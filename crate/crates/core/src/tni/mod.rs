//! Tensor-network warm start: data compressed to matrix product states, the
//! QCNN mapped to a tree of two-qubit nodes, and a classical cross-entropy
//! fit whose result seeds circuit training.

mod mps;
mod ttn;

pub use mps::{mps_from_vector, MpsState, Tensor3};
pub use ttn::{contract_and_score, ttn_from_plan, NodeKind, TtnModel, TtnNode, DEFAULT_CHI};

use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::circuit::{EncodedSample, ParameterVector, QcnnPlan};
use crate::error::{QcnnError, Result};
use crate::sim::Param;
use crate::training::{adam_step, AdamHyper, OptimizerState};

pub const SCORE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TniConfig {
    /// Bond cap applied while contracting the tree.
    pub chi: usize,
    /// Bond cap for the data states.
    pub chi_data: usize,
    pub iterations: usize,
    pub subset_size: usize,
    pub init_stddev: f64,
    pub seed: u64,
    /// Samples per iteration, drawn cyclically from the subset.
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TniConfig {
    fn default() -> Self {
        Self {
            chi: DEFAULT_CHI,
            chi_data: 1,
            iterations: 50,
            subset_size: 128,
            init_stddev: 0.1,
            seed: 0,
            batch_size: 8,
            learning_rate: 0.015,
        }
    }
}

impl TniConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("chi", self.chi),
            ("chi_data", self.chi_data),
            ("iterations", self.iterations),
            ("subset_size", self.subset_size),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(QcnnError::Config(format!("tni {name} must be at least 1")));
            }
        }
        if self.chi > 64 || self.chi_data > 64 {
            return Err(QcnnError::Config("bond caps above 64 are not supported".into()));
        }
        if !(self.init_stddev >= 0.0 && self.init_stddev.is_finite()) {
            return Err(QcnnError::Config("init_stddev must be finite and non-negative".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(QcnnError::Config("tni learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Binary cross-entropy on a score clamped to `[1e-7, 1 − 1e-7]`.
pub fn pseudo_loss(score: f64, label: u8) -> f64 {
    let s = score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP);
    if label == 1 {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

/// `d pseudo_loss / d score`; zero where the clamp is active.
fn pseudo_loss_slope(score: f64, label: u8) -> f64 {
    if !(SCORE_CLAMP..=1.0 - SCORE_CLAMP).contains(&score) {
        return 0.0;
    }
    if label == 1 {
        -1.0 / score
    } else {
        1.0 / (1.0 - score)
    }
}

pub fn encode_mps(sample: &EncodedSample, chi_data: usize) -> Result<MpsState> {
    let amps: Vec<C64> = sample.amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect();
    mps_from_vector(&amps, chi_data)
}

/// Score of one data state and its shift-rule gradient. Each symbol
/// occurrence is shifted separately; contractions reuse the chain state
/// before the shifted node.
pub fn score_gradient(ttn: &TtnModel, theta: &[f64], mps: &MpsState) -> Result<(f64, Vec<f64>)> {
    let k = ttn.nodes.len();
    let mut prefix = Vec::with_capacity(k + 1);
    prefix.push(mps.clone());
    for node in &ttn.nodes {
        let mut next = prefix.last().expect("seeded").clone();
        next.apply_two_qubit(node.qubits[0], node.qubits[1], &node.tensor, ttn.chi)?;
        prefix.push(next);
    }
    let score = ttn::local_score(&prefix[k], &ttn.survivors)?;
    let mut grad = vec![0.0; theta.len()];
    for (i, node) in ttn.nodes.iter().enumerate() {
        let [h, l] = node.qubits;
        for (j, op) in node.ops.iter().enumerate() {
            let Some(Param::Symbol(s)) = op.param() else { continue };
            let mut diff = 0.0;
            for sign in [1.0, -1.0] {
                let m = ttn::node_matrix(&node.ops, h, l, |idx, o| {
                    let base = match o.param() {
                        Some(Param::Symbol(t)) => theta[t],
                        Some(Param::Fixed(a)) => a,
                        None => 0.0,
                    };
                    if idx == j {
                        base + sign * FRAC_PI_2
                    } else {
                        base
                    }
                });
                let mut st = prefix[i].clone();
                st.apply_two_qubit(h, l, &m, ttn.chi)?;
                ttn.contract_from(&mut st, i + 1)?;
                diff += sign * ttn::local_score(&st, &ttn.survivors)?;
            }
            grad[s] += diff / 2.0;
        }
    }
    Ok((score, grad))
}

/// Mean pseudo-loss over a batch of data states and its gradient.
pub fn batch_pseudo_loss(
    ttn: &TtnModel,
    theta: &[f64],
    batch: &[(&MpsState, u8)],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(QcnnError::Empty("tni batch"));
    }
    let per: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .map(|(mps, _)| score_gradient(ttn, theta, mps))
        .collect();
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for ((_, label), r) in batch.iter().zip(per) {
        let (score, g) = r?;
        loss += pseudo_loss(score, *label);
        let slope = pseudo_loss_slope(score, *label) / b;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += slope * gi;
        }
    }
    Ok((loss / b, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TniOutcome {
    pub theta: ParameterVector,
    /// Batch pseudo-loss before each update.
    pub losses: Vec<f64>,
}

pub fn tni_pretrain(data: &[EncodedSample], plan: &QcnnPlan, config: &TniConfig) -> Result<ParameterVector> {
    Ok(tni_pretrain_with_history(data, plan, config)?.theta)
}

/// Draws `θ ~ N(0, σ²)`, then runs Adam on the batch pseudo-loss of the
/// tree contraction for the configured number of iterations.
pub fn tni_pretrain_with_history(
    data: &[EncodedSample],
    plan: &QcnnPlan,
    config: &TniConfig,
) -> Result<TniOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(QcnnError::Empty("tni data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool: Vec<usize> = (0..data.len()).collect();
    pool.shuffle(&mut rng);
    pool.truncate(config.subset_size);
    let states: Vec<(MpsState, u8)> = pool
        .iter()
        .map(|&i| Ok((encode_mps(&data[i], config.chi_data)?, data[i].label)))
        .collect::<Result<_>>()?;

    let normal = Normal::new(0.0, config.init_stddev)
        .map_err(|e| QcnnError::Config(format!("init distribution: {e}")))?;
    let mut theta: Vec<f64> = (0..plan.total_parameters).map(|_| normal.sample(&mut rng)).collect();
    let mut ttn = ttn_from_plan(plan, &theta.clone().into())?.with_chi(config.chi);
    let hyper = AdamHyper {
        eta0: config.learning_rate,
        gamma: 1.0,
        decay_steps: 1,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
    let mut opt = OptimizerState::new(theta.len());
    let mut order: Vec<usize> = (0..states.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size.min(states.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let (mps, y) = &states[order[cursor]];
            batch.push((mps, *y));
            cursor += 1;
        }
        let (loss, grad) = batch_pseudo_loss(&ttn, &theta, &batch)?;
        losses.push(loss);
        adam_step(&mut opt, &mut theta, &grad, &hyper)?;
        ttn.rebind(&theta);
    }
    Ok(TniOutcome {
        theta: theta.into(),
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{amplitude_encode, build_qcnn, StageSchedule};
    use rand::Rng;

    #[test]
    fn pseudo_loss_examples() {
        assert!((pseudo_loss(0.5, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((pseudo_loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(pseudo_loss(1.0 - 1e-12, 1) < 1e-6);
        assert!((pseudo_loss(0.9, 0) - std::f64::consts::LN_10).abs() < 1e-12);
        assert!(pseudo_loss(0.0, 1).is_finite());
        assert!(pseudo_loss(1.0, 0).is_finite());
    }

    fn toy(n: usize, count: usize, seed: u64) -> Vec<EncodedSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|i| {
                let px: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(0.0..1.0)).collect();
                amplitude_encode(&px, n).unwrap().with_label((i % 2) as u8)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (plan, _) = build_qcnn(4, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let theta: Vec<f64> = (0..plan.total_parameters).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let data = toy(4, 3, 32);
        let states: Vec<MpsState> = data.iter().map(|s| encode_mps(s, 16).unwrap()).collect();
        let batch: Vec<(&MpsState, u8)> = states.iter().zip(&data).map(|(m, s)| (m, s.label)).collect();
        let ttn = ttn_from_plan(&plan, &theta.clone().into()).unwrap();
        let (_, g) = batch_pseudo_loss(&ttn, &theta, &batch).unwrap();
        let h = 1e-5;
        let loss_at = |t: &[f64]| {
            let tt = ttn_from_plan(&plan, &t.to_vec().into()).unwrap();
            batch_pseudo_loss(&tt, t, &batch).unwrap().0
        };
        for mu in 0..theta.len() {
            let mut p = theta.clone();
            p[mu] += h;
            let mut m = theta.clone();
            m[mu] -= h;
            let fd = (loss_at(&p) - loss_at(&m)) / (2.0 * h);
            let rel = (g[mu] - fd).abs() / fd.abs().max(1e-3);
            assert!(rel < 1e-4, "symbol {mu}: {} vs {fd}", g[mu]);
        }
    }

    #[test]
    fn pretrain_is_seeded_and_sized() {
        let (plan, _) = build_qcnn(4, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let data = toy(4, 20, 33);
        let cfg = TniConfig {
            iterations: 5,
            subset_size: 10,
            batch_size: 4,
            seed: 9,
            ..TniConfig::default()
        };
        let a = tni_pretrain_with_history(&data, &plan, &cfg).unwrap();
        let b = tni_pretrain_with_history(&data, &plan, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.theta.len(), plan.total_parameters);
        assert_eq!(a.losses.len(), 5);
        let c = tni_pretrain(&data, &plan, &TniConfig { seed: 10, ..cfg.clone() }).unwrap();
        assert_ne!(a.theta, c);
        assert!(tni_pretrain(&[], &plan, &cfg).is_err());
        assert!(tni_pretrain(&data, &plan, &TniConfig { chi: 0, ..cfg }).is_err());
    }

    #[test]
    fn init_draws_have_requested_spread() {
        let normal = Normal::new(0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.02);
    }

    #[test]
    fn training_lowers_pseudo_loss() {
        let (plan, _) = build_qcnn(4, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let data = toy(4, 16, 34);
        let cfg = TniConfig {
            iterations: 40,
            subset_size: 16,
            batch_size: 16,
            chi_data: 16,
            learning_rate: 0.05,
            ..TniConfig::default()
        };
        let out = tni_pretrain_with_history(&data, &plan, &cfg).unwrap();
        assert!(out.losses.last().unwrap() < &out.losses[0]);
    }
}
