use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};
use crate::sim::StateVector;

/// A classical sample amplitude-encoded into `log2(len)` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub amplitudes: Vec<f64>,
    pub label: u8,
}

impl EncodedSample {
    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn to_state(&self) -> Result<StateVector> {
        StateVector::from_real(&self.amplitudes)
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = label;
        self
    }
}

/// Zero-pads `pixels` to `2^num_qubits` and L2-normalizes.
pub fn amplitude_encode(pixels: &[f64], num_qubits: usize) -> Result<EncodedSample> {
    if num_qubits == 0 || num_qubits > crate::sim::MAX_QUBITS {
        return Err(QcnnError::Config(format!(
            "cannot encode into {num_qubits} qubits"
        )));
    }
    let dim = 1usize << num_qubits;
    if pixels.len() > dim {
        return Err(QcnnError::InputTooLong {
            len: pixels.len(),
            num_qubits,
        });
    }
    if let Some(v) = pixels.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(QcnnError::Config(format!(
            "pixel intensities must be finite and non-negative, got {v}"
        )));
    }
    let norm = pixels.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(QcnnError::ZeroNorm);
    }
    let mut amplitudes = vec![0.0; dim];
    for (a, v) in amplitudes.iter_mut().zip(pixels) {
        *a = v / norm;
    }
    Ok(EncodedSample {
        amplitudes,
        label: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_and_normalizes() {
        let s = amplitude_encode(&[3.0, 4.0], 2).unwrap();
        assert_eq!(s.amplitudes, vec![0.6, 0.8, 0.0, 0.0]);
        assert_eq!(s.num_qubits(), 2);
        let psi = s.to_state().unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn image_fits_ten_qubits() {
        let pixels: Vec<f64> = (0..784).map(|i| (i % 7) as f64 / 255.0).collect();
        let s = amplitude_encode(&pixels, 10).unwrap();
        assert_eq!(s.amplitudes.len(), 1024);
        assert!(s.amplitudes[784..].iter().all(|&a| a == 0.0));
        let norm: f64 = s.amplitudes.iter().map(|a| a * a).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(amplitude_encode(&[0.0; 4], 2), Err(QcnnError::ZeroNorm)));
        assert!(matches!(
            amplitude_encode(&[1.0; 5], 2),
            Err(QcnnError::InputTooLong { len: 5, num_qubits: 2 })
        ));
        assert!(amplitude_encode(&[1.0, -0.5], 1).is_err());
        assert!(amplitude_encode(&[f64::NAN], 1).is_err());
        assert!(amplitude_encode(&[1.0], 0).is_err());
    }
}
