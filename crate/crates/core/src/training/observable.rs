use super::CostKind;
use crate::sim::{stride, StateVector};

/// Cost observable diagonal in the computational basis, stored as one weight
/// per basis index. Both cost kinds have this form.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalObservable {
    weights: Vec<f64>,
}

impl DiagonalObservable {
    /// Weight of basis index `x` is the fraction of survivors reading 1.
    pub fn local(num_qubits: usize, survivors: &[usize]) -> Self {
        let masks: Vec<usize> = survivors.iter().map(|&q| stride(num_qubits, q)).collect();
        let m = masks.len() as f64;
        let weights = (0..1usize << num_qubits)
            .map(|x| masks.iter().filter(|&&s| x & s != 0).count() as f64 / m)
            .collect();
        Self { weights }
    }

    /// Weight 0 when every survivor reads 0, else 1.
    pub fn global(num_qubits: usize, survivors: &[usize]) -> Self {
        let mask = survivors.iter().fold(0, |acc, &q| acc | stride(num_qubits, q));
        let weights = (0..1usize << num_qubits)
            .map(|x| if x & mask == 0 { 0.0 } else { 1.0 })
            .collect();
        Self { weights }
    }

    pub fn for_cost(kind: CostKind, num_qubits: usize, survivors: &[usize]) -> Self {
        match kind {
            CostKind::Local => Self::local(num_qubits, survivors),
            CostKind::Global => Self::global(num_qubits, survivors),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation(&self, psi: &StateVector) -> f64 {
        psi.amplitudes()
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a.norm_sqr() * w)
            .sum()
    }

    /// `D|ψ⟩` written into `out`.
    pub(crate) fn apply_into(&self, psi: &StateVector, out: &mut StateVector) {
        for ((o, a), w) in out
            .amplitudes_mut()
            .iter_mut()
            .zip(psi.amplitudes())
            .zip(&self.weights)
        {
            *o = a * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::RunOutput;
    use crate::training::{cost_global, cost_local};
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let raw: Vec<C64> = (0..1 << n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    #[test]
    fn matches_direct_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let psi = random_state(5, &mut rng);
            let survivors = [1, 3, 4];
            let out = RunOutput::Pure(psi.clone());
            let l = DiagonalObservable::local(5, &survivors).expectation(&psi);
            let g = DiagonalObservable::global(5, &survivors).expectation(&psi);
            assert!((l - cost_local(&out, &survivors).unwrap()).abs() < 1e-13);
            assert!((g - cost_global(&out, &survivors).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn single_survivor_costs_coincide() {
        let l = DiagonalObservable::local(3, &[2]);
        let g = DiagonalObservable::global(3, &[2]);
        assert_eq!(l, g);
    }
}
