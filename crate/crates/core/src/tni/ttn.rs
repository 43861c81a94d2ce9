use serde::{Deserialize, Serialize};

use super::mps::MpsState;
use crate::circuit::{conv_block, pool_block, ParameterVector, QcnnPlan};
use crate::error::{QcnnError, Result};
use crate::sim::kernel::{identity4, kron2, matmul4, Mat4, ONE, ZERO};
use crate::sim::{GateKind, GateOp, Param};

pub const DEFAULT_CHI: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Conv,
    Pool,
}

/// One block of the QCNN as a two-qubit tensor. Pool nodes end the path of
/// their control qubit; the target carries on to the next layer.
#[derive(Debug, Clone, PartialEq)]
pub struct TtnNode {
    pub kind: NodeKind,
    pub stage: usize,
    /// `(high, low)`: the block's first qubit sits on the high bit.
    pub qubits: [usize; 2],
    pub ops: Vec<GateOp>,
    pub tensor: Mat4,
    pub discards: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtnModel {
    pub num_qubits: usize,
    pub nodes: Vec<TtnNode>,
    pub survivors: Vec<usize>,
    pub chi: usize,
}

fn embed_1q(m: &crate::sim::Mat2, high: bool) -> Mat4 {
    let id = [[ONE, ZERO], [ZERO, ONE]];
    if high {
        kron2(m, &id)
    } else {
        kron2(&id, m)
    }
}

/// 4×4 unitary of a gate list on `(high, low)`. `angle_of` supplies each
/// op's angle by position in the list.
pub(crate) fn node_matrix(ops: &[GateOp], high: usize, low: usize, angle_of: impl Fn(usize, &GateOp) -> f64) -> Mat4 {
    let mut acc = identity4();
    for (i, op) in ops.iter().enumerate() {
        let q = op.qubits();
        let g = match op.kind() {
            GateKind::Cz => GateKind::Cz.entangler_matrix().expect("entangler"),
            GateKind::Cnot => {
                let c = GateKind::Cnot.entangler_matrix().expect("entangler");
                if q[0] == high {
                    c
                } else {
                    let s = swap();
                    matmul4(&s, &matmul4(&c, &s))
                }
            }
            kind => {
                let r = kind.rotation_matrix(angle_of(i, op)).expect("rotation");
                debug_assert!(q[0] == high || q[0] == low);
                embed_1q(&r, q[0] == high)
            }
        };
        acc = matmul4(&g, &acc);
    }
    acc
}

fn swap() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][2] = ONE;
    m[2][1] = ONE;
    m[3][3] = ONE;
    m
}

fn bound_angle(op: &GateOp, theta: &[f64]) -> f64 {
    match op.param() {
        Some(Param::Symbol(s)) => theta[s],
        Some(Param::Fixed(a)) => a,
        None => 0.0,
    }
}

/// Maps each conv/pool block of `plan` to a node holding its unitary at
/// `theta`, in circuit order.
pub fn ttn_from_plan(plan: &QcnnPlan, theta: &ParameterVector) -> Result<TtnModel> {
    if theta.len() != plan.total_parameters {
        return Err(QcnnError::SymbolMismatch {
            expected: plan.total_parameters,
            got: theta.len(),
        });
    }
    let mut nodes = Vec::with_capacity(plan.num_blocks());
    for (stage_idx, stage) in plan.stages.iter().enumerate() {
        for layer in &stage.conv {
            for &(a, b) in &layer.pairs {
                let ops = conv_block(a, b, layer.symbols.map(Param::Symbol))?;
                nodes.push(TtnNode {
                    kind: NodeKind::Conv,
                    stage: stage_idx,
                    qubits: [a, b],
                    tensor: node_matrix(&ops, a, b, |_, op| bound_angle(op, theta.as_slice())),
                    ops,
                    discards: None,
                });
            }
        }
        for &(control, target) in &stage.pool.pairs {
            let (ops, discard) = pool_block(control, target, Param::Symbol(stage.pool.symbol))?;
            nodes.push(TtnNode {
                kind: NodeKind::Pool,
                stage: stage_idx,
                qubits: [control, target],
                tensor: node_matrix(&ops, control, target, |_, op| bound_angle(op, theta.as_slice())),
                ops,
                discards: Some(discard),
            });
        }
    }
    Ok(TtnModel {
        num_qubits: plan.num_qubits,
        nodes,
        survivors: plan.survivors().to_vec(),
        chi: DEFAULT_CHI,
    })
}

impl TtnModel {
    pub fn with_chi(mut self, chi: usize) -> Self {
        self.chi = chi;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Recomputes node tensors at new parameters.
    pub fn rebind(&mut self, theta: &[f64]) {
        for node in &mut self.nodes {
            let [h, l] = node.qubits;
            node.tensor = node_matrix(&node.ops, h, l, |_, op| bound_angle(op, theta));
        }
    }

    /// Applies nodes `from..` to `mps` in place.
    pub(crate) fn contract_from(&self, mps: &mut MpsState, from: usize) -> Result<()> {
        for node in &self.nodes[from..] {
            mps.apply_two_qubit(node.qubits[0], node.qubits[1], &node.tensor, self.chi)?;
        }
        Ok(())
    }

    fn check(&self, mps: &MpsState) -> Result<()> {
        if mps.num_qubits() != self.num_qubits {
            return Err(QcnnError::Dimension(format!(
                "MPS has {} sites, tree expects {}",
                mps.num_qubits(),
                self.num_qubits
            )));
        }
        if self.chi == 0 {
            return Err(QcnnError::Config("bond cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Local score computed from Z expectations of the contracted chain.
pub(crate) fn local_score(mps: &MpsState, survivors: &[usize]) -> Result<f64> {
    if survivors.is_empty() {
        return Err(QcnnError::EmptySurvivors);
    }
    let z = mps.z_expectations(survivors)?;
    Ok(z.iter().map(|z| (1.0 - z) / 2.0).sum::<f64>() / z.len() as f64)
}

/// Contracts the tree with a data MPS and returns the mean of
/// `(1 − ⟨Z_i⟩)/2` over `survivors`. Discarded qubits stay in the chain:
/// they receive no further nodes, so survivor marginals are unaffected.
pub fn contract_and_score(ttn: &TtnModel, mps: &MpsState, survivors: &[usize]) -> Result<f64> {
    ttn.check(mps)?;
    let mut state = mps.clone();
    ttn.contract_from(&mut state, 0)?;
    local_score(&state, survivors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{amplitude_encode, build_qcnn, StageSchedule};
    use crate::sim::kernel::max_abs_diff4;
    use crate::sim::NoiseConfig;
    use crate::tni::mps_from_vector;
    use crate::training::{cost_local, QcnnModel};
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    #[test]
    fn zero_angles_give_cz_and_identity_nodes() {
        let (plan, _) = build_qcnn(6, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let ttn = ttn_from_plan(&plan, &ParameterVector::zeros(plan.total_parameters)).unwrap();
        assert_eq!(ttn.num_nodes(), plan.num_blocks());
        let cz = GateKind::Cz.entangler_matrix().unwrap();
        for node in &ttn.nodes {
            let expect = match node.kind {
                NodeKind::Conv => cz,
                NodeKind::Pool => identity4(),
            };
            assert!(max_abs_diff4(&node.tensor, &expect) < 1e-12);
        }
        assert!(ttn_from_plan(&plan, &ParameterVector::zeros(3)).is_err());
    }

    #[test]
    fn nodes_equal_simulated_block_unitaries() {
        let (plan, _) = build_qcnn(8, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let theta: Vec<f64> = (0..plan.total_parameters).map(|_| rng.gen_range(0.0..TAU)).collect();
        let ttn = ttn_from_plan(&plan, &theta.clone().into()).unwrap();
        for node in &ttn.nodes {
            let [h, l] = node.qubits;
            let sim = crate::circuit::block_matrix(&node.ops, h, l, &theta).unwrap();
            assert!(max_abs_diff4(&node.tensor, &sim) < 1e-12);
        }
    }

    #[test]
    fn identity_tree_scores() {
        let (plan, _) = build_qcnn(4, &StageSchedule::Halving { terminal: 1 }).unwrap();
        let mut ttn = ttn_from_plan(&plan, &ParameterVector::zeros(plan.total_parameters)).unwrap();
        for node in &mut ttn.nodes {
            node.tensor = identity4();
        }
        let zero = MpsState::product(&[[ONE, ZERO]; 4]).unwrap();
        let one = MpsState::product(&[[ZERO, ONE]; 4]).unwrap();
        assert!(contract_and_score(&ttn, &zero, &[1, 3]).unwrap().abs() < 1e-14);
        assert!((contract_and_score(&ttn, &one, &[1, 3]).unwrap() - 1.0).abs() < 1e-14);
        let short = MpsState::product(&[[ONE, ZERO]; 3]).unwrap();
        assert!(contract_and_score(&ttn, &short, &[1]).is_err());
    }

    #[test]
    fn contraction_matches_simulator() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for trial in 0..50 {
            let n = 2 + trial % 5;
            let schedule = if trial % 2 == 0 {
                StageSchedule::Halving { terminal: 1 }
            } else {
                StageSchedule::Halving { terminal: 2 }
            };
            let Ok((plan, _)) = build_qcnn(n, &schedule) else { continue };
            let theta: Vec<f64> = (0..plan.total_parameters).map(|_| rng.gen_range(0.0..TAU)).collect();
            let pixels: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let sample = amplitude_encode(&pixels, n).unwrap();
            let amps: Vec<C64> = sample.amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect();
            let mps = mps_from_vector(&amps, 1 << n).unwrap();
            let ttn = ttn_from_plan(&plan, &theta.clone().into()).unwrap().with_chi(1 << n);
            let score = contract_and_score(&ttn, &mps, plan.survivors()).unwrap();
            let model = QcnnModel::new(plan).unwrap();
            let out = model
                .circuit()
                .bind_and_run(&theta.into(), &sample, NoiseConfig::disabled())
                .unwrap();
            let expect = cost_local(&out, model.survivors()).unwrap();
            assert!((score - expect).abs() < 1e-8, "n={n}: {score} vs {expect}");
        }
    }
}
