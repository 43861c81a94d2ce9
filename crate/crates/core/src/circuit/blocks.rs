use crate::error::{QcnnError, Result};
use crate::sim::{GateKind, GateOp, Param};

fn distinct(a: usize, b: usize) -> Result<()> {
    if a == b {
        return Err(QcnnError::InvalidGate(format!(
            "block needs two distinct qubits, got {a} twice"
        )));
    }
    Ok(())
}

/// Convolution block on `(q_a, q_b)`:
/// `(RY(φ3) ⊗ RY(φ4)) · CZ · (RX(φ1) ⊗ RX(φ2))`, emitted in application order.
pub fn conv_block(q_a: usize, q_b: usize, params: [Param; 4]) -> Result<Vec<GateOp>> {
    distinct(q_a, q_b)?;
    Ok(vec![
        GateOp::rotation(GateKind::Rx, q_a, params[0])?,
        GateOp::rotation(GateKind::Rx, q_b, params[1])?,
        GateOp::cz(q_a, q_b)?,
        GateOp::rotation(GateKind::Ry, q_a, params[2])?,
        GateOp::rotation(GateKind::Ry, q_b, params[3])?,
    ])
}

/// Pooling block `CNOT(j→k) · (I ⊗ RY(θ)) · CNOT(j→k)`. Returns the gates and
/// the control qubit, which is discarded afterwards.
pub fn pool_block(control: usize, target: usize, param: Param) -> Result<(Vec<GateOp>, usize)> {
    distinct(control, target)?;
    Ok((
        vec![
            GateOp::cnot(control, target)?,
            GateOp::rotation(GateKind::Ry, target, param)?,
            GateOp::cnot(control, target)?,
        ],
        control,
    ))
}

/// 4×4 matrix of a two-qubit gate sequence on `(high, low)`, obtained by
/// running it on each basis state. Symbols are bound from `theta`.
#[cfg(test)]
pub(crate) fn block_matrix(ops: &[GateOp], high: usize, low: usize, theta: &[f64]) -> Result<crate::sim::Mat4> {
    use crate::sim::kernel::ZERO;
    use crate::sim::StateVector;
    let mut m = [[ZERO; 4]; 4];
    for col in 0..4 {
        let mut basis = [0.0; 4];
        basis[col] = 1.0;
        let mut psi = StateVector::from_real(&basis)?;
        for op in ops {
            let remap = |q: usize| if q == high { 0 } else if q == low { 1 } else { usize::MAX };
            let qs: Vec<usize> = op.qubits().iter().map(|&q| remap(q)).collect();
            let local = GateOp::new(op.kind(), &qs, op.param())?;
            let angle = match op.param() {
                Some(Param::Symbol(s)) => Some(theta[s]),
                Some(Param::Fixed(a)) => Some(a),
                None => None,
            };
            psi.apply_gate(&local, angle)?;
        }
        for (row, line) in m.iter_mut().enumerate() {
            line[col] = psi.amplitudes()[row];
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::kernel::{identity4, kron2, matmul4, max_abs_diff4, unitarity_error4, ONE, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixed4(a: [f64; 4]) -> [Param; 4] {
        a.map(Param::Fixed)
    }

    fn ry(theta: f64) -> crate::sim::Mat2 {
        GateKind::Ry.rotation_matrix(theta).unwrap()
    }

    #[test]
    fn conv_emission_order() {
        let ops = conv_block(3, 4, [0, 1, 2, 3].map(Param::Symbol)).unwrap();
        let kinds: Vec<_> = ops.iter().map(|o| o.kind()).collect();
        assert_eq!(
            kinds,
            [GateKind::Rx, GateKind::Rx, GateKind::Cz, GateKind::Ry, GateKind::Ry]
        );
        assert_eq!(ops[0].qubits(), &[3]);
        assert_eq!(ops[1].qubits(), &[4]);
        assert_eq!(ops.iter().filter_map(|o| o.symbol()).count(), 4);
        assert!(conv_block(2, 2, fixed4([0.0; 4])).is_err());
    }

    #[test]
    fn conv_at_zero_is_cz() {
        let ops = conv_block(0, 1, fixed4([0.0; 4])).unwrap();
        let m = block_matrix(&ops, 0, 1, &[]).unwrap();
        let cz = GateKind::Cz.entangler_matrix().unwrap();
        assert!(max_abs_diff4(&m, &cz) < 1e-12);
    }

    #[test]
    fn conv_matches_formula_and_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let phi: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..std::f64::consts::TAU));
            let m = block_matrix(&conv_block(0, 1, fixed4(phi)).unwrap(), 0, 1, &[]).unwrap();
            let rx = |t| GateKind::Rx.rotation_matrix(t).unwrap();
            let cz = GateKind::Cz.entangler_matrix().unwrap();
            let expect = matmul4(
                &kron2(&ry(phi[2]), &ry(phi[3])),
                &matmul4(&cz, &kron2(&rx(phi[0]), &rx(phi[1]))),
            );
            assert!(max_abs_diff4(&m, &expect) < 1e-12);
            assert!(unitarity_error4(&m) < 1e-12);
        }
    }

    #[test]
    fn pool_structure() {
        let (ops, discard) = pool_block(0, 1, Param::Fixed(0.0)).unwrap();
        assert_eq!(discard, 0);
        let m = block_matrix(&ops, 0, 1, &[]).unwrap();
        assert!(max_abs_diff4(&m, &identity4()) < 1e-12);
        assert!(pool_block(1, 1, Param::Fixed(0.0)).is_err());
    }

    #[test]
    fn pool_matches_formula() {
        let cnot = GateKind::Cnot.entangler_matrix().unwrap();
        let id2 = [[ONE, ZERO], [ZERO, ONE]];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let theta = rng.gen_range(-10.0..10.0);
            let (ops, _) = pool_block(0, 1, Param::Fixed(theta)).unwrap();
            let m = block_matrix(&ops, 0, 1, &[]).unwrap();
            let expect = matmul4(&cnot, &matmul4(&kron2(&id2, &ry(theta)), &cnot));
            assert!(max_abs_diff4(&m, &expect) < 1e-12);
        }
    }

    #[test]
    fn pool_is_controlled_rotation() {
        // control |0⟩ → RY(θ); control |1⟩ → X·RY(θ)·X = RY(−θ)
        let theta = 0.913;
        let (ops, _) = pool_block(0, 1, Param::Fixed(theta)).unwrap();
        let m = block_matrix(&ops, 0, 1, &[]).unwrap();
        let plus = ry(theta);
        let minus = ry(-theta);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - plus[i][j]).norm() < 1e-12);
                assert!((m[2 + i][2 + j] - minus[i][j]).norm() < 1e-12);
                assert!(m[i][2 + j].norm() < 1e-12);
                assert!(m[2 + i][j].norm() < 1e-12);
            }
        }
    }
}
