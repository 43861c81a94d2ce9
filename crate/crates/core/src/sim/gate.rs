use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::kernel::{Mat2, Mat4, ONE, ZERO};
use crate::error::{QcnnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cz,
    Cnot,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn arity(self) -> usize {
        if self.is_rotation() {
            1
        } else {
            2
        }
    }

    /// `exp(−iθσ/2)` for the rotation kinds.
    pub fn rotation_matrix(self, theta: f64) -> Option<Mat2> {
        let (s, c) = (theta / 2.0).sin_cos();
        let m = match self {
            GateKind::Rx => [
                [C64::new(c, 0.0), C64::new(0.0, -s)],
                [C64::new(0.0, -s), C64::new(c, 0.0)],
            ],
            GateKind::Ry => [
                [C64::new(c, 0.0), C64::new(-s, 0.0)],
                [C64::new(s, 0.0), C64::new(c, 0.0)],
            ],
            GateKind::Rz => [
                [C64::new(c, -s), ZERO],
                [ZERO, C64::new(c, s)],
            ],
            GateKind::Cz | GateKind::Cnot => return None,
        };
        Some(m)
    }

    /// The Pauli generator σ with `R(θ) = exp(−iθσ/2)`.
    pub fn generator(self) -> Option<Mat2> {
        let m = match self {
            GateKind::Rx => [[ZERO, ONE], [ONE, ZERO]],
            GateKind::Ry => [[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]],
            GateKind::Rz => [[ONE, ZERO], [ZERO, -ONE]],
            GateKind::Cz | GateKind::Cnot => return None,
        };
        Some(m)
    }

    /// Two-qubit matrix with the first listed qubit on the high bit.
    pub fn entangler_matrix(self) -> Option<Mat4> {
        let mut m = [[ZERO; 4]; 4];
        match self {
            GateKind::Cz => {
                for i in 0..4 {
                    m[i][i] = ONE;
                }
                m[3][3] = -ONE;
            }
            GateKind::Cnot => {
                m[0][0] = ONE;
                m[1][1] = ONE;
                m[2][3] = ONE;
                m[3][2] = ONE;
            }
            _ => return None,
        }
        Some(m)
    }
}

/// Angle source for a rotation: a literal or an index into a parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Param {
    Fixed(f64),
    Symbol(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    kind: GateKind,
    qubits: [usize; 2],
    param: Option<Param>,
}

impl GateOp {
    pub fn new(kind: GateKind, qubits: &[usize], param: Option<Param>) -> Result<Self> {
        if qubits.len() != kind.arity() {
            return Err(QcnnError::InvalidGate(format!(
                "{kind:?} takes {} qubit(s), got {}",
                kind.arity(),
                qubits.len()
            )));
        }
        if kind.is_rotation() != param.is_some() {
            return Err(QcnnError::InvalidGate(format!(
                "{kind:?} {} a parameter",
                if kind.is_rotation() { "requires" } else { "takes no" }
            )));
        }
        if kind.arity() == 2 && qubits[0] == qubits[1] {
            return Err(QcnnError::InvalidGate(format!(
                "{kind:?} needs two distinct qubits, got {} twice",
                qubits[0]
            )));
        }
        let pair = if kind.arity() == 2 {
            [qubits[0], qubits[1]]
        } else {
            [qubits[0], qubits[0]]
        };
        Ok(Self {
            kind,
            qubits: pair,
            param,
        })
    }

    pub fn rotation(kind: GateKind, qubit: usize, param: Param) -> Result<Self> {
        Self::new(kind, &[qubit], Some(param))
    }

    pub fn cz(a: usize, b: usize) -> Result<Self> {
        Self::new(GateKind::Cz, &[a, b], None)
    }

    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        Self::new(GateKind::Cnot, &[control, target], None)
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.kind.arity()]
    }

    pub fn param(&self) -> Option<Param> {
        self.param
    }

    pub fn symbol(&self) -> Option<usize> {
        match self.param {
            Some(Param::Symbol(s)) => Some(s),
            _ => None,
        }
    }

    /// Resolves the angle for this gate: an explicit `angle` wins, then a
    /// fixed parameter.
    pub(crate) fn resolve_angle(&self, angle: Option<f64>) -> Result<Option<f64>> {
        if !self.kind.is_rotation() {
            return Ok(None);
        }
        match (angle, self.param) {
            (Some(a), _) => Ok(Some(a)),
            (None, Some(Param::Fixed(a))) => Ok(Some(a)),
            _ => Err(QcnnError::MissingAngle { kind: self.kind }),
        }
    }

    pub(crate) fn check_range(&self, num_qubits: usize) -> Result<()> {
        for &q in self.qubits() {
            if q >= num_qubits {
                return Err(QcnnError::QubitOutOfRange {
                    index: q,
                    num_qubits,
                });
            }
        }
        Ok(())
    }
}
