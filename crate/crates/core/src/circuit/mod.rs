//! Symbolic circuits, the QCNN ansatz builder and amplitude encoding.

mod blocks;
mod encode;
mod plan;

pub use blocks::{conv_block, pool_block};
#[cfg(test)]
pub(crate) use blocks::block_matrix;
pub use encode::{amplitude_encode, EncodedSample};
pub use plan::{build_qcnn, ConvLayer, PoolLayer, QcnnPlan, Stage, StageSchedule, SymbolRole};

use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};
use crate::sim::{DensityMatrix, GateOp, NoiseConfig, Param, StateVector};

/// Trainable angles in radians, one per circuit symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Gate(GateOp),
    /// End of a two-qubit block; the noise attachment point.
    BlockEnd([usize; 2]),
    /// The qubit is traced out and receives no further gates.
    Discard(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    num_symbols: usize,
    instructions: Vec<Instruction>,
    discarded: Vec<bool>,
}

impl Circuit {
    pub fn new(num_qubits: usize, num_symbols: usize) -> Self {
        Self {
            num_qubits,
            num_symbols,
            instructions: Vec::new(),
            discarded: vec![false; num_qubits],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateOp> {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::Gate(op) => Some(op),
            _ => None,
        })
    }

    /// Number of gates driven by a symbol; each is one parameter-shift site.
    pub fn num_occurrences(&self) -> usize {
        self.gates().filter(|g| g.symbol().is_some()).count()
    }

    pub fn is_discarded(&self, qubit: usize) -> bool {
        self.discarded.get(qubit).copied().unwrap_or(false)
    }

    pub fn active_qubits(&self) -> Vec<usize> {
        (0..self.num_qubits).filter(|&q| !self.discarded[q]).collect()
    }

    pub fn push_gate(&mut self, op: GateOp) -> Result<()> {
        op.check_range(self.num_qubits)?;
        if let Some(Param::Symbol(s)) = op.param() {
            if s >= self.num_symbols {
                return Err(QcnnError::InvalidGate(format!(
                    "symbol {s} out of range for {} symbols",
                    self.num_symbols
                )));
            }
        }
        if let Some(&q) = op.qubits().iter().find(|&&q| self.discarded[q]) {
            return Err(QcnnError::InvalidGate(format!(
                "qubit {q} was discarded and cannot receive gates"
            )));
        }
        self.instructions.push(Instruction::Gate(op));
        Ok(())
    }

    /// Appends a two-qubit block: its gates followed by a noise marker.
    pub fn push_block(&mut self, qubits: [usize; 2], ops: &[GateOp]) -> Result<()> {
        for op in ops {
            self.push_gate(*op)?;
        }
        self.instructions.push(Instruction::BlockEnd(qubits));
        Ok(())
    }

    pub fn push_discard(&mut self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(QcnnError::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        if self.discarded[qubit] {
            return Err(QcnnError::InvalidGate(format!(
                "qubit {qubit} discarded twice"
            )));
        }
        if self.discarded.iter().filter(|&&d| !d).count() == 1 {
            return Err(QcnnError::TraceAll);
        }
        self.discarded[qubit] = true;
        self.instructions.push(Instruction::Discard(qubit));
        Ok(())
    }

    pub fn check_theta(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.num_symbols {
            return Err(QcnnError::SymbolMismatch {
                expected: self.num_symbols,
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn angle(op: &GateOp, theta: &[f64]) -> f64 {
        match op.param() {
            Some(Param::Symbol(s)) => theta[s],
            Some(Param::Fixed(a)) => a,
            None => 0.0,
        }
    }

    /// Pure-state evolution. `shift` adds an offset to the angle of one
    /// symbol occurrence (counted in gate order).
    pub(crate) fn evolve(&self, theta: &[f64], state: &mut StateVector, shift: Option<(usize, f64)>) {
        let mut occurrence = 0;
        for op in self.gates() {
            let mut angle = Self::angle(op, theta);
            if op.symbol().is_some() {
                if let Some((k, delta)) = shift {
                    if k == occurrence {
                        angle += delta;
                    }
                }
                occurrence += 1;
            }
            state.apply_unchecked(op, angle);
        }
    }

    pub fn run_pure(&self, theta: &ParameterVector, input: &StateVector) -> Result<StateVector> {
        self.check_theta(theta)?;
        self.check_input(input.num_qubits())?;
        let mut state = input.clone();
        self.evolve(theta.as_slice(), &mut state, None);
        Ok(state)
    }

    /// Density-matrix evolution. Discarded qubits are traced out as soon as
    /// they are marked; with noise enabled each block is followed by an
    /// independent depolarizing channel on both of its qubits.
    pub fn run_density(
        &self,
        theta: &ParameterVector,
        input: DensityMatrix,
        noise: NoiseConfig,
    ) -> Result<DensityMatrix> {
        self.check_theta(theta)?;
        self.check_input(input.num_qubits())?;
        noise.validate()?;
        let mut rho = input;
        let mut traced = vec![false; self.num_qubits];
        for instr in &self.instructions {
            match instr {
                Instruction::Gate(op) => {
                    rho.apply_gate(op, Some(Self::angle(op, theta.as_slice())))?;
                }
                Instruction::BlockEnd(qubits) => {
                    if noise.enabled && noise.p > 0.0 {
                        for &q in qubits {
                            if !traced[q] {
                                rho.apply_depolarizing(q, noise.p)?;
                            }
                        }
                    }
                }
                Instruction::Discard(q) => {
                    rho = rho.partial_trace(&[*q])?;
                    traced[*q] = true;
                }
            }
        }
        Ok(rho)
    }

    fn check_input(&self, num_qubits: usize) -> Result<()> {
        if num_qubits != self.num_qubits {
            return Err(QcnnError::Dimension(format!(
                "input has {num_qubits} qubits, circuit has {}",
                self.num_qubits
            )));
        }
        Ok(())
    }

    /// Binds `theta` and evolves an encoded sample: pure path when noise is
    /// disabled, density-matrix path otherwise.
    pub fn bind_and_run(
        &self,
        theta: &ParameterVector,
        input: &EncodedSample,
        noise: NoiseConfig,
    ) -> Result<RunOutput> {
        let psi = input.to_state()?;
        if noise.enabled {
            Ok(RunOutput::Mixed(self.run_density(theta, psi.to_density(), noise)?))
        } else {
            Ok(RunOutput::Pure(self.run_pure(theta, &psi)?))
        }
    }
}

#[derive(Debug, Clone)]
pub enum RunOutput {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl RunOutput {
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        match self {
            RunOutput::Pure(s) => s.expectation_z(qubit),
            RunOutput::Mixed(r) => r.expectation_z(qubit),
        }
    }

    pub fn expectation_global_projector(&self, qubits: &[usize]) -> Result<f64> {
        match self {
            RunOutput::Pure(s) => s.expectation_global_projector(qubits),
            RunOutput::Mixed(r) => r.expectation_global_projector(qubits),
        }
    }
}
