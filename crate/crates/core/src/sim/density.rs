use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::gate::{GateKind, GateOp};
use super::kernel::{self, Mat2, Mat4, ZERO};
use super::state::{stride, StateVector};
use crate::error::{QcnnError, Result};

/// Largest depolarizing probability for which the single-qubit channel is
/// completely positive.
pub const MAX_DEPOLARIZING: f64 = 0.75;

/// Mixed state over a labelled set of qubits.
///
/// `labels[k]` is the original register index of the qubit stored at
/// position `k`; gates and observables address qubits by label, so the
/// labels survive partial traces. Positions follow the same convention as
/// [`StateVector`]: position 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    labels: Vec<usize>,
    elems: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &StateVector) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut elems = vec![ZERO; dim * dim];
        for (r, a) in amps.iter().enumerate() {
            for (c, b) in amps.iter().enumerate() {
                elems[r * dim + c] = a * b.conj();
            }
        }
        Self {
            labels: (0..state.num_qubits()).collect(),
            elems,
        }
    }

    /// Row-major `2^n × 2^n` elements with labels `0..n`.
    pub fn from_elements(num_qubits: usize, elems: Vec<C64>) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if elems.len() != dim * dim {
            return Err(QcnnError::Dimension(format!(
                "{} elements for a {dim}×{dim} matrix",
                elems.len()
            )));
        }
        Ok(Self {
            labels: (0..num_qubits).collect(),
            elems,
        })
    }

    /// `a ⊗ b`, relabelled `0..n_a + n_b`.
    pub fn kron(a: &DensityMatrix, b: &DensityMatrix) -> Self {
        let (da, db) = (a.dim(), b.dim());
        let dim = da * db;
        let mut elems = vec![ZERO; dim * dim];
        for ra in 0..da {
            for ca in 0..da {
                let x = a.elems[ra * da + ca];
                for rb in 0..db {
                    for cb in 0..db {
                        elems[(ra * db + rb) * dim + ca * db + cb] = x * b.elems[rb * db + cb];
                    }
                }
            }
        }
        Self {
            labels: (0..a.num_qubits() + b.num_qubits()).collect(),
            elems,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        1 << self.labels.len()
    }

    pub fn element(&self, row: usize, col: usize) -> C64 {
        self.elems[row * self.dim() + col]
    }

    fn position(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(QcnnError::QubitOutOfRange {
                index: label,
                num_qubits: self.labels.len(),
            })
    }

    /// Strides of the row and column bit for `label` in the flattened buffer.
    fn strides(&self, label: usize) -> Result<(usize, usize)> {
        let pos = self.position(label)?;
        let col = stride(self.num_qubits(), pos);
        Ok((col * self.dim(), col))
    }

    /// `ρ → UρU†` on one qubit.
    pub fn apply_matrix1(&mut self, label: usize, m: &Mat2) -> Result<()> {
        let (row, col) = self.strides(label)?;
        kernel::apply_1q(&mut self.elems, row, m);
        kernel::apply_1q(&mut self.elems, col, &kernel::conj2(m));
        Ok(())
    }

    /// `ρ → UρU†` with `a` on the high bit of `m`.
    pub fn apply_matrix2(&mut self, a: usize, b: usize, m: &Mat4) -> Result<()> {
        if a == b {
            return Err(QcnnError::InvalidGate(format!(
                "two-qubit operator on qubit {a} twice"
            )));
        }
        let (ra, ca) = self.strides(a)?;
        let (rb, cb) = self.strides(b)?;
        kernel::apply_2q(&mut self.elems, ra, rb, m);
        kernel::apply_2q(&mut self.elems, ca, cb, &kernel::conj4(m));
        Ok(())
    }

    pub fn apply_gate(&mut self, op: &GateOp, angle: Option<f64>) -> Result<()> {
        let angle = op.resolve_angle(angle)?;
        let q = op.qubits();
        match op.kind() {
            GateKind::Cz => {
                let (ra, ca) = self.strides(q[0])?;
                let (rb, cb) = self.strides(q[1])?;
                kernel::apply_cz(&mut self.elems, ra, rb);
                kernel::apply_cz(&mut self.elems, ca, cb);
            }
            GateKind::Cnot => {
                let (ra, ca) = self.strides(q[0])?;
                let (rb, cb) = self.strides(q[1])?;
                kernel::apply_cnot(&mut self.elems, ra, rb);
                kernel::apply_cnot(&mut self.elems, ca, cb);
            }
            kind => {
                let m = kind
                    .rotation_matrix(angle.unwrap_or(0.0))
                    .expect("rotation kind");
                self.apply_matrix1(q[0], &m)?;
            }
        }
        Ok(())
    }

    /// Single-qubit depolarizing channel
    /// `ρ → (1−p)ρ + (p/3)(XρX + YρY + ZρZ)`, evaluated in closed form on
    /// each 2×2 block of the addressed qubit.
    pub fn apply_depolarizing(&mut self, label: usize, p: f64) -> Result<()> {
        if !(0.0..=MAX_DEPOLARIZING).contains(&p) {
            return Err(QcnnError::NoiseOutOfRange(p));
        }
        let (row, col) = self.strides(label)?;
        let keep_diag = 1.0 - 2.0 * p / 3.0;
        let swap_diag = 2.0 * p / 3.0;
        let off = 1.0 - 4.0 * p / 3.0;
        for i in 0..self.elems.len() {
            if i & (row | col) != 0 {
                continue;
            }
            let (i00, i01, i10, i11) = (i, i | col, i | row, i | row | col);
            let a = self.elems[i00];
            let d = self.elems[i11];
            self.elems[i00] = a * keep_diag + d * swap_diag;
            self.elems[i11] = d * keep_diag + a * swap_diag;
            self.elems[i01] *= off;
            self.elems[i10] *= off;
        }
        Ok(())
    }

    /// Reduced state after tracing out every label in `discard`.
    pub fn partial_trace(&self, discard: &[usize]) -> Result<DensityMatrix> {
        let n = self.num_qubits();
        let mut traced_pos = Vec::with_capacity(discard.len());
        for &label in discard {
            let pos = self.position(label)?;
            if !traced_pos.contains(&pos) {
                traced_pos.push(pos);
            }
        }
        if traced_pos.len() >= n {
            return Err(QcnnError::TraceAll);
        }
        let kept_pos: Vec<usize> = (0..n).filter(|p| !traced_pos.contains(p)).collect();
        let scatter = |positions: &[usize]| -> Vec<usize> {
            let k = positions.len();
            (0..1usize << k)
                .map(|idx| {
                    positions
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| idx & (1 << (k - 1 - j)) != 0)
                        .map(|(_, &p)| stride(n, p))
                        .sum()
                })
                .collect()
        };
        let kept_map = scatter(&kept_pos);
        let traced_map = scatter(&traced_pos);
        let dim = self.dim();
        let new_dim = kept_map.len();
        let mut elems = vec![ZERO; new_dim * new_dim];
        for (r, &fr) in kept_map.iter().enumerate() {
            for (c, &fc) in kept_map.iter().enumerate() {
                elems[r * new_dim + c] = traced_map
                    .iter()
                    .map(|&t| self.elems[(fr | t) * dim + (fc | t)])
                    .sum();
            }
        }
        Ok(DensityMatrix {
            labels: kept_pos.iter().map(|&p| self.labels[p]).collect(),
            elems,
        })
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|i| self.elems[i * dim + i]).sum()
    }

    pub fn purity(&self) -> f64 {
        let dim = self.dim();
        let mut total = ZERO;
        for r in 0..dim {
            for c in 0..dim {
                total += self.elems[r * dim + c] * self.elems[c * dim + r];
            }
        }
        total.re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.elems[r * dim + c] - self.elems[c * dim + r].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let m = DMatrix::from_fn(dim, dim, |r, c| self.elems[r * dim + c]);
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn expectation_z(&self, label: usize) -> Result<f64> {
        let (_, col) = self.strides(label)?;
        let dim = self.dim();
        Ok((0..dim)
            .map(|i| {
                let p = self.elems[i * dim + i].re;
                if i & col == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum())
    }

    pub fn expectation_global_projector(&self, labels: &[usize]) -> Result<f64> {
        if labels.is_empty() {
            return Err(QcnnError::EmptySurvivors);
        }
        let mut mask = 0;
        for &l in labels {
            mask |= self.strides(l)?.1;
        }
        let dim = self.dim();
        Ok((0..dim)
            .filter(|i| i & mask == 0)
            .map(|i| self.elems[i * dim + i].re)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::gate::Param;
    use crate::sim::kernel::ONE;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli() -> [Mat2; 3] {
        let i = C64::new(0.0, 1.0);
        [
            [[ZERO, ONE], [ONE, ZERO]],
            [[ZERO, -i], [i, ZERO]],
            [[ONE, ZERO], [ZERO, -ONE]],
        ]
    }

    fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    /// Kraus-sum oracle: (1−p)ρ + (p/3) Σ σρσ with explicit matrices.
    fn kraus_oracle(rho: &Mat2, p: f64) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = rho[i][j] * (1.0 - p);
            }
        }
        for s in pauli() {
            let t = mul2(&mul2(&s, rho), &s);
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += t[i][j] * (p / 3.0);
                }
            }
        }
        out
    }

    fn random_qubit_density(rng: &mut ChaCha8Rng) -> Mat2 {
        // random point in the Bloch ball
        let (x, y, z, r): (f64, f64, f64, f64) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..1.0),
        );
        let len = (x * x + y * y + z * z).sqrt().max(1e-12);
        let (x, y, z) = (x / len * r, y / len * r, z / len * r);
        [
            [C64::new((1.0 + z) / 2.0, 0.0), C64::new(x / 2.0, -y / 2.0)],
            [C64::new(x / 2.0, y / 2.0), C64::new((1.0 - z) / 2.0, 0.0)],
        ]
    }

    fn from2(m: &Mat2) -> DensityMatrix {
        DensityMatrix::from_elements(1, vec![m[0][0], m[0][1], m[1][0], m[1][1]]).unwrap()
    }

    #[test]
    fn pure_density() {
        let rho = StateVector::new_zero(1).unwrap().to_density();
        assert_eq!(rho.element(0, 0), ONE);
        assert_eq!(rho.element(1, 1), ZERO);
        let h = 1.0 / 2f64.sqrt();
        let rho = StateVector::from_real(&[h, h]).unwrap().to_density();
        for r in 0..2 {
            for c in 0..2 {
                assert!((rho.element(r, c) - C64::new(0.5, 0.0)).norm() < 1e-15);
            }
        }
        let raw = [C64::new(0.5, 0.1), C64::new(-0.3, 0.4), C64::new(0.2, -0.2), C64::new(0.1, 0.0)];
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = StateVector::from_amplitudes(raw.iter().map(|a| a / norm).collect()).unwrap();
        assert!((s.to_density().purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn depolarizing_examples() {
        let mut rho = StateVector::new_zero(1).unwrap().to_density();
        let before = rho.clone();
        rho.apply_depolarizing(0, 0.0).unwrap();
        assert_eq!(rho, before);

        let mut rho = StateVector::new_zero(1).unwrap().to_density();
        rho.apply_depolarizing(0, 0.01).unwrap();
        let oracle = kraus_oracle(&[[ONE, ZERO], [ZERO, ZERO]], 0.01);
        assert!((rho.element(0, 0).re - (1.0 - 0.02 / 3.0)).abs() < 1e-15);
        assert!((rho.element(1, 1).re - 0.02 / 3.0).abs() < 1e-15);
        assert!((rho.element(0, 0) - oracle[0][0]).norm() < 1e-15);
        assert!((rho.element(0, 0).re - 0.993_333_333_333_333_3).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random_qubit_density(&mut rng);
            let mut rho = from2(&m);
            rho.apply_depolarizing(0, 0.75).unwrap();
            assert!((rho.element(0, 0).re - 0.5).abs() < 1e-14);
            assert!((rho.element(1, 1).re - 0.5).abs() < 1e-14);
            assert!(rho.element(0, 1).norm() < 1e-14);
        }
        let mut rho = StateVector::new_zero(1).unwrap().to_density();
        assert!(matches!(
            rho.apply_depolarizing(0, 0.8),
            Err(QcnnError::NoiseOutOfRange(_))
        ));
        assert!(rho.apply_depolarizing(0, -0.1).is_err());
    }

    #[test]
    fn depolarizing_matches_kraus_sum_and_is_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let m = random_qubit_density(&mut rng);
            let p = rng.gen_range(0.0..=MAX_DEPOLARIZING);
            let mut rho = from2(&m);
            rho.apply_depolarizing(0, p).unwrap();
            let oracle = kraus_oracle(&m, p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((rho.element(i, j) - oracle[i][j]).norm() < 1e-14);
                }
            }
            assert!((rho.trace() - ONE).norm() < 1e-12);
            assert!(rho.min_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn depolarizing_acts_on_the_addressed_qubit_only() {
        // |01⟩: depolarize qubit 0, qubit 1 must stay |1⟩
        let mut rho = StateVector::from_real(&[0.0, 1.0, 0.0, 0.0]).unwrap().to_density();
        rho.apply_depolarizing(0, 0.3).unwrap();
        assert!((rho.expectation_z(1).unwrap() + 1.0).abs() < 1e-14);
        assert!((rho.expectation_z(0).unwrap() - (1.0 - 0.4)).abs() < 1e-14);
    }

    #[test]
    fn partial_trace_examples() {
        let h = 1.0 / 2f64.sqrt();
        let bell = StateVector::from_real(&[h, 0.0, 0.0, h]).unwrap().to_density();
        let reduced = bell.partial_trace(&[0]).unwrap();
        assert_eq!(reduced.labels(), &[1]);
        assert!((reduced.element(0, 0).re - 0.5).abs() < 1e-15);
        assert!((reduced.element(1, 1).re - 0.5).abs() < 1e-15);
        assert!(reduced.element(0, 1).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = from2(&random_qubit_density(&mut rng));
        let b = from2(&random_qubit_density(&mut rng));
        let ab = DensityMatrix::kron(&a, &b);
        let back = ab.partial_trace(&[1]).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((back.element(r, c) - a.element(r, c)).norm() < 1e-14);
            }
        }
        let back_b = ab.partial_trace(&[0]).unwrap();
        assert!((back_b.element(0, 1) - b.element(0, 1)).norm() < 1e-14);
        assert!((ab.trace() - ONE).norm() < 1e-12);
        assert!(matches!(ab.partial_trace(&[0, 1]), Err(QcnnError::TraceAll)));
    }

    #[test]
    fn gates_match_pure_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 4;
        let mut psi = StateVector::new_zero(n).unwrap();
        let mut rho = psi.to_density();
        for _ in 0..60 {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            let op = match rng.gen_range(0..5) {
                0 => GateOp::rotation(GateKind::Rx, a, Param::Fixed(rng.gen_range(0.0..6.3))),
                1 => GateOp::rotation(GateKind::Ry, a, Param::Fixed(rng.gen_range(0.0..6.3))),
                2 => GateOp::rotation(GateKind::Rz, a, Param::Fixed(rng.gen_range(0.0..6.3))),
                3 => GateOp::cz(a, b),
                _ => GateOp::cnot(a, b),
            }
            .unwrap();
            psi.apply_gate(&op, None).unwrap();
            rho.apply_gate(&op, None).unwrap();
        }
        for q in 0..n {
            let pure = psi.expectation_z(q).unwrap();
            assert!((pure - rho.expectation_z(q).unwrap()).abs() < 1e-10);
        }
        let pure = psi.expectation_global_projector(&[1, 3]).unwrap();
        assert!((pure - rho.expectation_global_projector(&[1, 3]).unwrap()).abs() < 1e-10);
        assert!(rho.hermiticity_error() < 1e-10);
    }
}
