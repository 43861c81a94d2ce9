use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{QcnnError, Result};
use crate::sim::kernel::{Mat4, ONE, ZERO};

/// Singular values below this fraction of the largest are dropped.
const SVD_CUTOFF: f64 = 1e-14;

/// Rank-3 site tensor indexed `(left, physical, right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub left: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl Tensor3 {
    fn zeros(left: usize, right: usize) -> Self {
        Self {
            left,
            right,
            data: vec![ZERO; left * 2 * right],
        }
    }

    #[inline]
    pub fn at(&self, l: usize, p: usize, r: usize) -> C64 {
        self.data[(l * 2 + p) * self.right + r]
    }

    #[inline]
    fn at_mut(&mut self, l: usize, p: usize, r: usize) -> &mut C64 {
        &mut self.data[(l * 2 + p) * self.right + r]
    }
}

/// Matrix product state. Site `k` holds qubit `order[k]`; two-qubit
/// operations may permute the sites through swaps.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    tensors: Vec<Tensor3>,
    order: Vec<usize>,
}

struct Truncated {
    u: DMatrix<C64>,
    s: Vec<f64>,
    v_t: DMatrix<C64>,
}

fn svd_truncate(m: DMatrix<C64>, chi: usize) -> Truncated {
    let svd = m.svd(true, true);
    let s_all = svd.singular_values;
    let top = s_all.iter().copied().fold(0.0, f64::max);
    let keep = s_all
        .iter()
        .take_while(|&&s| s > SVD_CUTOFF * top)
        .count()
        .clamp(1, chi.max(1));
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    Truncated {
        u: u.columns(0, keep).into_owned(),
        s: s_all.iter().take(keep).copied().collect(),
        v_t: v_t.rows(0, keep).into_owned(),
    }
}

/// Left-to-right SVD sweep. Each bond keeps at most `chi_cap` of its largest
/// singular values; the result is rescaled to unit norm.
pub fn mps_from_vector(amplitudes: &[C64], chi_cap: usize) -> Result<MpsState> {
    let len = amplitudes.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(QcnnError::Dimension(format!("{len} amplitudes is not a power of two ≥ 2")));
    }
    if chi_cap == 0 {
        return Err(QcnnError::Config("bond cap must be at least 1".into()));
    }
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QcnnError::ZeroNorm);
    }
    let n = len.trailing_zeros() as usize;
    let mut tensors = Vec::with_capacity(n);
    // remainder as (bond, rest) with row-major rest index
    let mut rest = DMatrix::from_row_slice(1, len, amplitudes);
    let mut left = 1;
    for k in 0..n - 1 {
        let cols = 1usize << (n - k - 1);
        let mut m = DMatrix::zeros(left * 2, cols);
        for l in 0..left {
            for p in 0..2 {
                for c in 0..cols {
                    m[(l * 2 + p, c)] = rest[(l, p * cols + c)];
                }
            }
        }
        let t = svd_truncate(m, chi_cap);
        let r = t.s.len();
        let mut a = Tensor3::zeros(left, r);
        for l in 0..left {
            for p in 0..2 {
                for j in 0..r {
                    *a.at_mut(l, p, j) = t.u[(l * 2 + p, j)];
                }
            }
        }
        tensors.push(a);
        let mut next = t.v_t;
        for (j, s) in t.s.iter().enumerate() {
            next.row_mut(j).scale_mut(*s);
        }
        rest = next;
        left = r;
    }
    let mut last = Tensor3::zeros(left, 1);
    for l in 0..left {
        for p in 0..2 {
            *last.at_mut(l, p, 0) = rest[(l, p)];
        }
    }
    let tail_norm = last.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut last.data {
        *a /= tail_norm;
    }
    tensors.push(last);
    Ok(MpsState {
        tensors,
        order: (0..n).collect(),
    })
}

fn swap_matrix() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][2] = ONE;
    m[2][1] = ONE;
    m[3][3] = ONE;
    m
}

impl MpsState {
    /// Product state, one `[amp0, amp1]` per qubit; every bond is 1.
    pub fn product(qubits: &[[C64; 2]]) -> Result<Self> {
        if qubits.is_empty() {
            return Err(QcnnError::Empty("product state"));
        }
        let mut tensors = Vec::with_capacity(qubits.len());
        for q in qubits {
            let norm = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
            if norm == 0.0 {
                return Err(QcnnError::ZeroNorm);
            }
            tensors.push(Tensor3 {
                left: 1,
                right: 1,
                data: vec![q[0] / norm, q[1] / norm],
            });
        }
        Ok(Self {
            tensors,
            order: (0..qubits.len()).collect(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[Tensor3] {
        &self.tensors
    }

    /// Qubit held by each site.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Internal bond dimensions, left to right.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn site_of(&self, qubit: usize) -> Result<usize> {
        self.order
            .iter()
            .position(|&q| q == qubit)
            .ok_or(QcnnError::QubitOutOfRange {
                index: qubit,
                num_qubits: self.order.len(),
            })
    }

    /// Dense amplitudes in qubit order (qubit 0 most significant).
    pub fn to_vector(&self) -> Vec<C64> {
        let n = self.tensors.len();
        // rows: site-ordered physical prefix, cols: current bond
        let mut acc = vec![ONE];
        let mut width = 1;
        for t in &self.tensors {
            let rows = acc.len() / width;
            let mut next = vec![ZERO; rows * 2 * t.right];
            for row in 0..rows {
                for l in 0..t.left {
                    let a = acc[row * width + l];
                    if a == ZERO {
                        continue;
                    }
                    for p in 0..2 {
                        for r in 0..t.right {
                            next[((row * 2 + p) * t.right) + r] += a * t.at(l, p, r);
                        }
                    }
                }
            }
            acc = next;
            width = t.right;
        }
        let mut out = vec![ZERO; 1 << n];
        for (site_index, a) in acc.into_iter().enumerate() {
            let mut q_index = 0;
            for (k, &q) in self.order.iter().enumerate() {
                if site_index >> (n - 1 - k) & 1 == 1 {
                    q_index |= 1 << (n - 1 - q);
                }
            }
            out[q_index] = a;
        }
        out
    }

    /// Applies a 4×4 operator to adjacent sites `(site, site + 1)`, the
    /// first site on the high bit, then splits with bond cap `chi`.
    pub(crate) fn apply_adjacent(&mut self, site: usize, m: &Mat4, chi: usize) {
        let (a, b) = (&self.tensors[site], &self.tensors[site + 1]);
        let (l, mid, r) = (a.left, a.right, b.right);
        let mut theta = vec![ZERO; l * 4 * r];
        for li in 0..l {
            for p1 in 0..2 {
                for k in 0..mid {
                    let x = a.at(li, p1, k);
                    if x == ZERO {
                        continue;
                    }
                    for p2 in 0..2 {
                        for ri in 0..r {
                            theta[((li * 2 + p1) * 2 + p2) * r + ri] += x * b.at(k, p2, ri);
                        }
                    }
                }
            }
        }
        let mut mat = DMatrix::zeros(l * 2, 2 * r);
        for li in 0..l {
            for q in 0..4 {
                let (q1, q2) = (q >> 1, q & 1);
                for ri in 0..r {
                    let mut sum = ZERO;
                    for (p, g) in m[q].iter().enumerate() {
                        if *g != ZERO {
                            sum += g * theta[(li * 4 + p) * r + ri];
                        }
                    }
                    mat[(li * 2 + q1, q2 * r + ri)] = sum;
                }
            }
        }
        let t = svd_truncate(mat, chi);
        let k = t.s.len();
        let mut na = Tensor3::zeros(l, k);
        let mut nb = Tensor3::zeros(k, r);
        for li in 0..l {
            for p in 0..2 {
                for j in 0..k {
                    *na.at_mut(li, p, j) = t.u[(li * 2 + p, j)];
                }
            }
        }
        for j in 0..k {
            for p in 0..2 {
                for ri in 0..r {
                    *nb.at_mut(j, p, ri) = t.v_t[(j, p * r + ri)] * t.s[j];
                }
            }
        }
        self.tensors[site] = na;
        self.tensors[site + 1] = nb;
    }

    fn swap_sites(&mut self, site: usize, chi: usize) {
        self.apply_adjacent(site, &swap_matrix(), chi);
        self.order.swap(site, site + 1);
    }

    /// Applies a two-qubit operator with `high` on the high bit. Non-adjacent
    /// qubits are first brought together by swapping `low` along the chain.
    pub fn apply_two_qubit(&mut self, high: usize, low: usize, m: &Mat4, chi: usize) -> Result<()> {
        if high == low {
            return Err(QcnnError::InvalidGate(format!("two-qubit operator on qubit {high} twice")));
        }
        let sa = self.site_of(high)?;
        let mut sb = self.site_of(low)?;
        while sb > sa + 1 {
            self.swap_sites(sb - 1, chi);
            sb -= 1;
        }
        while sb + 1 < sa {
            self.swap_sites(sb, chi);
            sb += 1;
        }
        if sa < sb {
            self.apply_adjacent(sa, m, chi);
        } else {
            let s = swap_matrix();
            let flipped = crate::sim::kernel::matmul4(&s, &crate::sim::kernel::matmul4(m, &s));
            self.apply_adjacent(sb, &flipped, chi);
        }
        Ok(())
    }

    fn transfer(env: &[C64], dim: usize, t: &Tensor3, weights: [f64; 2]) -> Vec<C64> {
        let mut out = vec![ZERO; t.right * t.right];
        // tmp[l', p, r] = Σ_l env[l, l'] conj(A[l, p, r])  (env indexed bra, ket)
        for p in 0..2 {
            if weights[p] == 0.0 {
                continue;
            }
            for r in 0..t.right {
                for l2 in 0..t.left {
                    let mut acc = ZERO;
                    for l in 0..dim {
                        acc += env[l * dim + l2] * t.at(l, p, r).conj();
                    }
                    if acc == ZERO {
                        continue;
                    }
                    let w = acc * weights[p];
                    for r2 in 0..t.right {
                        out[r * t.right + r2] += w * t.at(l2, p, r2);
                    }
                }
            }
        }
        out
    }

    /// `⟨ψ|ψ⟩` by transfer matrices.
    pub fn norm_sqr(&self) -> f64 {
        let mut env = vec![ONE];
        let mut dim = 1;
        for t in &self.tensors {
            env = Self::transfer(&env, dim, t, [1.0, 1.0]);
            dim = t.right;
        }
        env[0].re
    }

    /// Normalized `⟨Z⟩` for each listed qubit.
    pub fn z_expectations(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        let n = self.tensors.len();
        let mut lefts = Vec::with_capacity(n + 1);
        lefts.push((vec![ONE], 1));
        for t in &self.tensors {
            let (env, dim) = lefts.last().expect("seeded");
            lefts.push((Self::transfer(env, *dim, t, [1.0, 1.0]), t.right));
        }
        let norm = lefts[n].0[0].re;
        // right environments, rights[k] covers sites k..n
        let mut rights = vec![(vec![ONE], 1usize); n + 1];
        for k in (0..n).rev() {
            let t = &self.tensors[k];
            let (env, dim) = &rights[k + 1];
            let mut out = vec![ZERO; t.left * t.left];
            for p in 0..2 {
                for l in 0..t.left {
                    for r in 0..*dim {
                        let a = t.at(l, p, r).conj();
                        if a == ZERO {
                            continue;
                        }
                        for l2 in 0..t.left {
                            let mut acc = ZERO;
                            for r2 in 0..*dim {
                                acc += env[r * dim + r2] * t.at(l2, p, r2);
                            }
                            out[l * t.left + l2] += a * acc;
                        }
                    }
                }
            }
            rights[k] = (out, t.left);
        }
        let mut result = Vec::with_capacity(qubits.len());
        for &q in qubits {
            let s = self.site_of(q)?;
            let t = &self.tensors[s];
            let (env, dim) = &lefts[s];
            let with_z = Self::transfer(env, *dim, t, [1.0, -1.0]);
            let (renv, _) = &rights[s + 1];
            let z: C64 = with_z.iter().zip(renv).map(|(a, b)| a * b).sum();
            result.push(z.re / norm);
        }
        Ok(result)
    }
}
