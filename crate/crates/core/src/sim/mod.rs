//! Exact pure-state and density-matrix simulation.

mod density;
mod gate;
pub mod kernel;
mod state;

pub use density::{DensityMatrix, MAX_DEPOLARIZING};
pub use gate::{GateKind, GateOp, Param};
pub use kernel::{Mat2, Mat4};
pub use state::{StateVector, MAX_QUBITS};
pub(crate) use state::stride;

use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};

/// Depolarizing noise attached after every two-qubit block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p: f64,
    pub enabled: bool,
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        let cfg = Self { p, enabled: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_DEPOLARIZING).contains(&self.p) {
            return Err(QcnnError::NoiseOutOfRange(self.p));
        }
        Ok(())
    }
}
