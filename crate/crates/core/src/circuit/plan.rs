use serde::{Deserialize, Serialize};

use super::blocks::{conv_block, pool_block};
use super::Circuit;
use crate::error::{QcnnError, Result};
use crate::sim::Param;

/// How many qubits survive each pooling layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageSchedule {
    /// Pool every adjacent pair (an odd trailing qubit passes through)
    /// until at most `terminal` qubits remain.
    Halving { terminal: usize },
    /// Explicit survivor count after each stage. A stage that keeps `c` of
    /// `a` active qubits pools the first `a − c` adjacent pairs.
    Survivors(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub pairs: Vec<(usize, usize)>,
    pub symbols: [usize; 4],
}

/// Pairs are `(control, target)`; controls are discarded, targets survive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolLayer {
    pub pairs: Vec<(usize, usize)>,
    pub symbol: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub active: Vec<usize>,
    /// Even sub-layer first, then the offset sub-layer when it has pairs.
    pub conv: Vec<ConvLayer>,
    pub pool: PoolLayer,
    pub survivors: Vec<usize>,
}

/// Where a symbol is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolRole {
    pub symbol: usize,
    pub stage: usize,
    /// `"conv_even"`, `"conv_offset"` or `"pool"`.
    pub layer: String,
    /// Position within the block (0..4 for convolutions, 0 for pooling).
    pub slot: usize,
    pub blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcnnPlan {
    pub num_qubits: usize,
    pub schedule: StageSchedule,
    pub stages: Vec<Stage>,
    pub sharing_map: Vec<SymbolRole>,
    pub total_parameters: usize,
}

fn pool_count(schedule: &StageSchedule, stage: usize, active: usize) -> Result<Option<usize>> {
    let max = active / 2;
    match schedule {
        StageSchedule::Halving { terminal } => {
            if *terminal == 0 {
                return Err(QcnnError::Config(
                    "halving schedule with terminal 0 never terminates".into(),
                ));
            }
            Ok((active > *terminal).then_some(max))
        }
        StageSchedule::Survivors(counts) => {
            if counts.is_empty() {
                return Err(QcnnError::Config("empty survivor schedule".into()));
            }
            let Some(&keep) = counts.get(stage) else {
                return Ok(None);
            };
            if keep == 0 || keep >= active || active - keep > max {
                return Err(QcnnError::Config(format!(
                    "stage {stage}: cannot pool {active} active qubits down to {keep}"
                )));
            }
            Ok(Some(active - keep))
        }
    }
}

/// Builds the staged QCNN ansatz and its symbolic circuit.
///
/// Each stage applies a brick layer of convolution blocks on adjacent active
/// pairs `(0,1), (2,3), …`, then an offset layer on `(1,2), (3,4), …`; every
/// sub-layer shares one set of 4 symbols. A pooling layer sharing 1 symbol
/// follows, discarding the even member of each pooled pair.
pub fn build_qcnn(num_qubits: usize, schedule: &StageSchedule) -> Result<(QcnnPlan, Circuit)> {
    if num_qubits < 2 {
        return Err(QcnnError::Config(format!(
            "QCNN needs at least 2 qubits, got {num_qubits}"
        )));
    }
    if num_qubits > crate::sim::MAX_QUBITS {
        return Err(QcnnError::Config(format!(
            "qubit count {num_qubits} exceeds {}",
            crate::sim::MAX_QUBITS
        )));
    }
    let mut active: Vec<usize> = (0..num_qubits).collect();
    let mut stages = Vec::new();
    let mut sharing_map = Vec::new();
    let mut next_symbol = 0;

    while let Some(pooled) = pool_count(schedule, stages.len(), active.len())? {
        let stage_idx = stages.len();
        let mut conv = Vec::new();
        for (offset, name) in [(0, "conv_even"), (1, "conv_offset")] {
            let pairs: Vec<(usize, usize)> = (offset..active.len().saturating_sub(1))
                .step_by(2)
                .map(|i| (active[i], active[i + 1]))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let symbols = std::array::from_fn(|k| next_symbol + k);
            for (slot, &symbol) in symbols.iter().enumerate() {
                sharing_map.push(SymbolRole {
                    symbol,
                    stage: stage_idx,
                    layer: name.into(),
                    slot,
                    blocks: pairs.len(),
                });
            }
            next_symbol += 4;
            conv.push(ConvLayer { pairs, symbols });
        }
        let pairs: Vec<(usize, usize)> = (0..pooled).map(|i| (active[2 * i], active[2 * i + 1])).collect();
        sharing_map.push(SymbolRole {
            symbol: next_symbol,
            stage: stage_idx,
            layer: "pool".into(),
            slot: 0,
            blocks: pairs.len(),
        });
        let pool = PoolLayer {
            pairs,
            symbol: next_symbol,
        };
        next_symbol += 1;
        let discarded: Vec<usize> = pool.pairs.iter().map(|&(c, _)| c).collect();
        let survivors: Vec<usize> = active.iter().copied().filter(|q| !discarded.contains(q)).collect();
        stages.push(Stage {
            active: std::mem::replace(&mut active, survivors.clone()),
            conv,
            pool,
            survivors,
        });
    }
    if stages.is_empty() {
        return Err(QcnnError::Config(format!(
            "schedule {schedule:?} yields no stages for {num_qubits} qubits"
        )));
    }
    if let StageSchedule::Survivors(counts) = schedule {
        if counts.len() != stages.len() {
            return Err(QcnnError::Config(format!(
                "survivor schedule has {} entries but only {} stages were possible",
                counts.len(),
                stages.len()
            )));
        }
    }
    let plan = QcnnPlan {
        num_qubits,
        schedule: schedule.clone(),
        stages,
        sharing_map,
        total_parameters: next_symbol,
    };
    let circuit = plan.circuit()?;
    Ok((plan, circuit))
}

impl QcnnPlan {
    /// Emits the symbolic circuit for this plan.
    pub fn circuit(&self) -> Result<Circuit> {
        let mut circuit = Circuit::new(self.num_qubits, self.total_parameters);
        for stage in &self.stages {
            for layer in &stage.conv {
                let params = layer.symbols.map(Param::Symbol);
                for &(a, b) in &layer.pairs {
                    circuit.push_block([a, b], &conv_block(a, b, params)?)?;
                }
            }
            let mut discards = Vec::new();
            for &(control, target) in &stage.pool.pairs {
                let (ops, discard) = pool_block(control, target, Param::Symbol(stage.pool.symbol))?;
                circuit.push_block([control, target], &ops)?;
                discards.push(discard);
            }
            for q in discards {
                circuit.push_discard(q)?;
            }
        }
        Ok(circuit)
    }

    pub fn survivors(&self) -> &[usize] {
        &self.stages.last().expect("plan has stages").survivors
    }

    /// Symbols of the first convolution sub-layer.
    pub fn first_conv_symbols(&self) -> [usize; 4] {
        self.stages[0].conv[0].symbols
    }

    pub fn num_blocks(&self) -> usize {
        self.stages
            .iter()
            .map(|s| s.conv.iter().map(|l| l.pairs.len()).sum::<usize>() + s.pool.pairs.len())
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a plan and checks it against a fresh build of its schedule.
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: QcnnPlan = serde_json::from_str(text)?;
        let (rebuilt, _) = build_qcnn(plan.num_qubits, &plan.schedule)?;
        if rebuilt != plan {
            return Err(QcnnError::Config(
                "plan document does not match its schedule".into(),
            ));
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Instruction;
    use crate::sim::GateKind;

    #[test]
    fn four_qubits_one_stage() {
        let (plan, circuit) = build_qcnn(4, &StageSchedule::Halving { terminal: 2 }).unwrap();
        assert_eq!(plan.stages.len(), 1);
        let st = &plan.stages[0];
        assert_eq!(st.conv[0].pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(st.conv[1].pairs, vec![(1, 2)]);
        assert_eq!(st.pool.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(plan.survivors(), &[1, 3]);
        assert_eq!(plan.total_parameters, 9);
        assert_eq!(circuit.num_symbols(), 9);
        assert_eq!(circuit.active_qubits(), vec![1, 3]);
    }

    #[test]
    fn two_qubits() {
        let (plan, _) = build_qcnn(2, &StageSchedule::Halving { terminal: 1 }).unwrap();
        assert_eq!(plan.stages.len(), 1);
        assert_eq!(plan.stages[0].conv.len(), 1);
        assert_eq!(plan.stages[0].conv[0].pairs, vec![(0, 1)]);
        assert_eq!(plan.total_parameters, 5);
        assert_eq!(plan.survivors(), &[1]);
    }

    #[test]
    fn odd_count_passes_last_qubit_through() {
        let (plan, _) = build_qcnn(5, &StageSchedule::Halving { terminal: 1 }).unwrap();
        assert_eq!(plan.stages[0].pool.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(plan.stages[0].survivors, vec![1, 3, 4]);
        assert_eq!(plan.stages[1].survivors, vec![3, 4]);
        assert_eq!(plan.survivors(), &[4]);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(build_qcnn(1, &StageSchedule::Halving { terminal: 1 }).is_err());
        assert!(build_qcnn(8, &StageSchedule::Halving { terminal: 0 }).is_err());
        assert!(build_qcnn(8, &StageSchedule::Halving { terminal: 8 }).is_err());
        assert!(build_qcnn(8, &StageSchedule::Survivors(vec![8])).is_err());
        assert!(build_qcnn(8, &StageSchedule::Survivors(vec![6, 7])).is_err());
        assert!(build_qcnn(8, &StageSchedule::Survivors(vec![3])).is_err());
        assert!(build_qcnn(8, &StageSchedule::Survivors(vec![])).is_err());
    }

    #[test]
    fn weight_tying_within_sub_layers() {
        let (plan, circuit) = build_qcnn(8, &StageSchedule::Halving { terminal: 2 }).unwrap();
        // every block of the first even sub-layer references the same 4 symbols
        let layer = &plan.stages[0].conv[0];
        let mut per_block: Vec<Vec<usize>> = Vec::new();
        let mut current = Vec::new();
        for instr in circuit.instructions() {
            match instr {
                Instruction::Gate(op) => {
                    if let Some(s) = op.symbol() {
                        current.push(s);
                    }
                }
                Instruction::BlockEnd(_) => per_block.push(std::mem::take(&mut current)),
                Instruction::Discard(_) => {}
            }
        }
        for block in &per_block[..layer.pairs.len()] {
            assert_eq!(block, &layer.symbols.to_vec());
        }
        for role in &plan.sharing_map {
            assert!(role.symbol < plan.total_parameters);
        }
        assert_eq!(plan.sharing_map.len(), plan.total_parameters);
    }

    #[test]
    fn discarded_qubits_receive_no_later_gates() {
        for n in 2..=12 {
            let (_, circuit) = build_qcnn(n, &StageSchedule::Halving { terminal: 1 }).unwrap();
            let mut gone = vec![false; n];
            for instr in circuit.instructions() {
                match instr {
                    Instruction::Gate(op) => assert!(op.qubits().iter().all(|&q| !gone[q])),
                    Instruction::Discard(q) => gone[*q] = true,
                    Instruction::BlockEnd(_) => {}
                }
            }
        }
    }

    #[test]
    fn survivor_monotonicity_and_log_depth() {
        for n in 2..=16 {
            let (plan, _) = build_qcnn(n, &StageSchedule::Halving { terminal: 1 }).unwrap();
            let mut prev = n;
            for st in &plan.stages {
                assert!(st.survivors.len() < prev);
                prev = st.survivors.len();
            }
            assert!(!plan.survivors().is_empty());
            let log = (n as f64).log2().ceil() as usize;
            assert!(plan.stages.len() <= log + 1);
        }
    }

    #[test]
    fn conv_and_pool_symbol_counts() {
        let (plan, circuit) = build_qcnn(10, &StageSchedule::Survivors(vec![9, 8, 7, 6, 5])).unwrap();
        for st in &plan.stages {
            for l in &st.conv {
                let syms: std::collections::BTreeSet<_> = l.symbols.iter().collect();
                assert_eq!(syms.len(), 4);
            }
        }
        assert_eq!(plan.total_parameters, 45);
        let cz = circuit.gates().filter(|g| g.kind() == GateKind::Cz).count();
        assert_eq!(cz, plan.stages.iter().map(|s| s.conv.iter().map(|l| l.pairs.len()).sum::<usize>()).sum::<usize>());
    }

    #[test]
    fn json_round_trip_and_tamper_check() {
        let (plan, _) = build_qcnn(6, &StageSchedule::Halving { terminal: 2 }).unwrap();
        let text = plan.to_json().unwrap();
        assert_eq!(QcnnPlan::from_json(&text).unwrap(), plan);
        let tampered = text.replacen("\"total_parameters\": 18", "\"total_parameters\": 19", 1);
        assert_ne!(tampered, text);
        assert!(QcnnPlan::from_json(&tampered).is_err());
    }
}
