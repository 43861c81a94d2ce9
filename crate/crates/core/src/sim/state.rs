use num_complex::Complex64 as C64;

use super::density::DensityMatrix;
use super::gate::{GateKind, GateOp};
use super::kernel::{self, Mat2, Mat4, ONE, ZERO};
use crate::error::{QcnnError, Result};

/// Desk-scale register cap.
pub const MAX_QUBITS: usize = 20;

const NORM_TOL: f64 = 1e-10;

/// Pure state of `n` qubits.
///
/// Qubit 0 is the most significant bit of the basis index: in a 3-qubit
/// register, basis index `0b100` is `|1⟩|0⟩|0⟩` with qubit 0 set.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

pub(crate) fn stride(num_qubits: usize, qubit: usize) -> usize {
    1 << (num_qubits - 1 - qubit)
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(QcnnError::Config(format!(
            "qubit count {n} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    pub fn new_zero(num_qubits: usize) -> Result<Self> {
        check_qubit_count(num_qubits)?;
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[0] = ONE;
        Ok(Self { num_qubits, amps })
    }

    /// Wraps an amplitude list; its length must be a power of two and its
    /// 2-norm must be 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QcnnError::Dimension(format!(
                "amplitude count {len} is not a power of two ≥ 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_qubit_count(num_qubits)?;
        let state = Self { num_qubits, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QcnnError::Dimension(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    /// Tensor product of single-qubit states, qubit 0 first.
    pub fn product(qubits: &[[C64; 2]]) -> Result<Self> {
        check_qubit_count(qubits.len())?;
        let mut amps = vec![ONE];
        for q in qubits {
            let norm = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
            amps = amps
                .iter()
                .flat_map(|&a| [a * q[0] / norm, a * q[1] / norm])
                .collect();
        }
        Ok(Self {
            num_qubits: qubits.len(),
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(QcnnError::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    /// Applies `op`. Rotation gates take `angle` if given, else a fixed
    /// parameter; a symbolic parameter with no angle is an error.
    pub fn apply_gate(&mut self, op: &GateOp, angle: Option<f64>) -> Result<()> {
        op.check_range(self.num_qubits)?;
        let angle = op.resolve_angle(angle)?;
        self.apply_unchecked(op, angle.unwrap_or(0.0));
        Ok(())
    }

    /// Hot-path application for pre-validated ops.
    pub(crate) fn apply_unchecked(&mut self, op: &GateOp, angle: f64) {
        let q = op.qubits();
        match op.kind() {
            GateKind::Cz => kernel::apply_cz(
                &mut self.amps,
                stride(self.num_qubits, q[0]),
                stride(self.num_qubits, q[1]),
            ),
            GateKind::Cnot => kernel::apply_cnot(
                &mut self.amps,
                stride(self.num_qubits, q[0]),
                stride(self.num_qubits, q[1]),
            ),
            kind => {
                let m = kind.rotation_matrix(angle).expect("rotation kind");
                kernel::apply_1q(&mut self.amps, stride(self.num_qubits, q[0]), &m);
            }
        }
    }

    pub fn apply_matrix1(&mut self, qubit: usize, m: &Mat2) -> Result<()> {
        self.check_qubit(qubit)?;
        kernel::apply_1q(&mut self.amps, stride(self.num_qubits, qubit), m);
        Ok(())
    }

    /// Applies a 4×4 operator with qubit `a` on the high bit.
    pub fn apply_matrix2(&mut self, a: usize, b: usize, m: &Mat4) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(QcnnError::InvalidGate(format!(
                "two-qubit operator on qubit {a} twice"
            )));
        }
        kernel::apply_2q(
            &mut self.amps,
            stride(self.num_qubits, a),
            stride(self.num_qubits, b),
            m,
        );
        Ok(())
    }

    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let s = stride(self.num_qubits, qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & s == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// Probability that every listed qubit reads 0, marginalized over the rest.
    pub fn expectation_global_projector(&self, qubits: &[usize]) -> Result<f64> {
        if qubits.is_empty() {
            return Err(QcnnError::EmptySurvivors);
        }
        let mut mask = 0;
        for &q in qubits {
            self.check_qubit(q)?;
            mask |= stride(self.num_qubits, q);
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gate::Param;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rot(kind: GateKind, q: usize, angle: f64) -> GateOp {
        GateOp::rotation(kind, q, Param::Fixed(angle)).unwrap()
    }

    #[test]
    fn zero_state() {
        let s = StateVector::new_zero(1).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = StateVector::new_zero(2).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        let s = StateVector::new_zero(10).unwrap();
        assert_eq!(s.amplitudes().len(), 1024);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(StateVector::new_zero(0).is_err());
        assert!(StateVector::new_zero(21).is_err());
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let mut s = StateVector::new_zero(3).unwrap();
        s.apply_gate(&rot(GateKind::Rx, 0, PI), None).unwrap();
        // |100⟩ is basis index 4
        assert!((s.amplitudes()[4].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rx_pi_flips_with_minus_i() {
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply_gate(&rot(GateKind::Rx, 0, PI), None).unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn cz_on_11() {
        let mut s = StateVector::from_real(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        s.apply_gate(&GateOp::cz(0, 1).unwrap(), None).unwrap();
        assert_eq!(s.amplitudes()[3], -ONE);
    }

    #[test]
    fn rz_phase() {
        let theta = 0.37;
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply_gate(&rot(GateKind::Rz, 0, 0.0), Some(theta)).unwrap();
        assert!((s.amplitudes()[0] - C64::from_polar(1.0, -theta / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn missing_angle_and_range_errors() {
        let mut s = StateVector::new_zero(2).unwrap();
        let sym = GateOp::rotation(GateKind::Ry, 0, Param::Symbol(0)).unwrap();
        assert!(matches!(
            s.apply_gate(&sym, None),
            Err(QcnnError::MissingAngle { .. })
        ));
        let far = rot(GateKind::Rx, 2, 0.1);
        assert!(matches!(
            s.apply_gate(&far, None),
            Err(QcnnError::QubitOutOfRange { .. })
        ));
        assert!(s.expectation_z(5).is_err());
    }

    #[test]
    fn cnot_control_is_first_qubit() {
        let mut s = StateVector::from_real(&[0.0, 0.0, 1.0, 0.0]).unwrap(); // |10⟩
        s.apply_gate(&GateOp::cnot(0, 1).unwrap(), None).unwrap();
        assert_eq!(s.amplitudes()[3], ONE);
        let mut s = StateVector::from_real(&[0.0, 1.0, 0.0, 0.0]).unwrap(); // |01⟩
        s.apply_gate(&GateOp::cnot(0, 1).unwrap(), None).unwrap();
        assert_eq!(s.amplitudes()[1], ONE);
    }

    #[test]
    fn z_expectations() {
        let s = StateVector::new_zero(1).unwrap();
        assert_eq!(s.expectation_z(0).unwrap(), 1.0);
        let s = StateVector::from_real(&[0.0, 1.0]).unwrap();
        assert_eq!(s.expectation_z(0).unwrap(), -1.0);
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply_gate(&rot(GateKind::Ry, 0, FRAC_PI_2), None).unwrap();
        assert!(s.expectation_z(0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn global_projector() {
        let s = StateVector::new_zero(3).unwrap();
        assert_eq!(s.expectation_global_projector(&[0, 1, 2]).unwrap(), 1.0);
        let s = StateVector::from_real(&[0.0, 1.0]).unwrap();
        assert_eq!(s.expectation_global_projector(&[0]).unwrap(), 0.0);
        for m in 1..=5 {
            let h = 1.0 / 2f64.sqrt();
            let plus = vec![[C64::new(h, 0.0), C64::new(h, 0.0)]; m];
            let s = StateVector::product(&plus).unwrap();
            let all: Vec<usize> = (0..m).collect();
            let p = s.expectation_global_projector(&all).unwrap();
            assert!((p - 0.5f64.powi(m as i32)).abs() < 1e-12);
        }
        assert!(matches!(
            s.expectation_global_projector(&[]),
            Err(QcnnError::EmptySurvivors)
        ));
    }

    #[test]
    fn projector_marginalizes_unlisted_qubits() {
        // (|00⟩ + |01⟩)/√2: qubit 0 is always 0
        let h = 1.0 / 2f64.sqrt();
        let s = StateVector::from_real(&[h, h, 0.0, 0.0]).unwrap();
        assert!((s.expectation_global_projector(&[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.expectation_global_projector(&[1]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_amplitudes() {
        assert!(StateVector::from_real(&[1.0, 1.0]).is_err());
        assert!(StateVector::from_real(&[1.0, 0.0, 0.0]).is_err());
    }
}
