//! Bit-masked stride kernels over a flat amplitude buffer.
//!
//! A buffer of length `2^k` is addressed as a `k`-qubit register; `stride` is
//! the power of two selecting the bit of the target qubit. The kernels never
//! materialize a full operator.

use num_complex::Complex64 as C64;

pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn apply_1q(amps: &mut [C64], stride: usize, m: &Mat2) {
    let [[m00, m01], [m10, m11]] = *m;
    for chunk in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = chunk.split_at_mut(stride);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let x0 = *a0;
            let x1 = *a1;
            *a0 = m00 * x0 + m01 * x1;
            *a1 = m10 * x0 + m11 * x1;
        }
    }
}

/// Flips the sign of every amplitude whose `sa` and `sb` bits are both set.
pub(crate) fn apply_cz(amps: &mut [C64], sa: usize, sb: usize) {
    let mask = sa | sb;
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *a = -*a;
        }
    }
}

pub(crate) fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    for i in 0..amps.len() {
        if i & control != 0 && i & target == 0 {
            amps.swap(i, i | target);
        }
    }
}

/// General two-qubit operator; `sa` selects the high bit of the 4×4 basis
/// index and `sb` the low bit.
pub(crate) fn apply_2q(amps: &mut [C64], sa: usize, sb: usize, m: &Mat4) {
    let mask = sa | sb;
    for i in 0..amps.len() {
        if i & mask != 0 {
            continue;
        }
        let idx = [i, i | sb, i | sa, i | sa | sb];
        let x = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &target) in idx.iter().enumerate() {
            amps[target] = m[r][0] * x[0] + m[r][1] * x[1] + m[r][2] * x[2] + m[r][3] * x[3];
        }
    }
}

pub(crate) fn conj2(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[0][1].conj()],
        [m[1][0].conj(), m[1][1].conj()],
    ]
}

pub(crate) fn conj4(m: &Mat4) -> Mat4 {
    let mut out = *m;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x = x.conj();
        }
    }
    out
}

pub fn dagger2(m: &Mat2) -> Mat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

pub fn matmul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn dagger4(m: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = m[j][i].conj();
        }
    }
    out
}

/// `a ⊗ b` with `a` on the high bit.
pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = a[i >> 1][j >> 1] * b[i & 1][j & 1];
        }
    }
    out
}

pub fn identity4() -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = ONE;
    }
    out
}

/// Largest absolute entry of `U†U − I`.
pub fn unitarity_error4(m: &Mat4) -> f64 {
    let p = matmul4(&dagger4(m), m);
    let id = identity4();
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((p[i][j] - id[i][j]).norm());
        }
    }
    worst
}

pub fn max_abs_diff4(a: &Mat4, b: &Mat4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((a[i][j] - b[i][j]).norm());
        }
    }
    worst
}
