//! Quantum convolutional neural network simulation, training and
//! tensor-network initialization.

pub mod circuit;
pub mod data;
pub mod error;
pub mod sim;
pub mod tni;
pub mod training;

pub use error::{QcnnError, Result};
