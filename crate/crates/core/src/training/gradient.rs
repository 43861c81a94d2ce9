use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use super::{CostKind, DiagonalObservable, QcnnModel};
use crate::circuit::{Circuit, EncodedSample, ParameterVector};
use crate::error::{QcnnError, Result};
use crate::sim::StateVector;

/// How circuit derivatives are evaluated. Both give the exact analytic
/// gradient; the adjoint sweep needs one forward and one backward pass
/// instead of two circuit runs per symbol occurrence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Differentiator {
    #[default]
    ParameterShift,
    Adjoint,
}

impl std::str::FromStr for Differentiator {
    type Err = QcnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parameter_shift" | "shift" => Ok(Self::ParameterShift),
            "adjoint" => Ok(Self::Adjoint),
            other => Err(QcnnError::Config(format!("unknown differentiator {other:?}"))),
        }
    }
}

impl std::fmt::Display for Differentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ParameterShift => "parameter_shift",
            Self::Adjoint => "adjoint",
        })
    }
}

fn check_input(circuit: &Circuit, theta: &ParameterVector, input: &StateVector) -> Result<()> {
    circuit.check_theta(theta)?;
    if input.num_qubits() != circuit.num_qubits() {
        return Err(QcnnError::Dimension(format!(
            "input has {} qubits, circuit has {}",
            input.num_qubits(),
            circuit.num_qubits()
        )));
    }
    Ok(())
}

/// `∂⟨D⟩/∂θ_μ` by the two-term shift rule, applied separately to every gate
/// occurrence of a symbol and summed over the occurrences.
pub fn shift_gradient(
    circuit: &Circuit,
    theta: &ParameterVector,
    input: &StateVector,
    obs: &DiagonalObservable,
) -> Result<Vec<f64>> {
    check_input(circuit, theta, input)?;
    let mut grad = vec![0.0; circuit.num_symbols()];
    let symbols = circuit.gates().filter_map(|g| g.symbol());
    for (k, s) in symbols.enumerate() {
        let mut plus = input.clone();
        circuit.evolve(theta.as_slice(), &mut plus, Some((k, FRAC_PI_2)));
        let mut minus = input.clone();
        circuit.evolve(theta.as_slice(), &mut minus, Some((k, -FRAC_PI_2)));
        grad[s] += (obs.expectation(&plus) - obs.expectation(&minus)) / 2.0;
    }
    Ok(grad)
}

/// Shift-rule derivative of several observables with respect to one
/// symbol, sharing the shifted circuit runs.
pub fn symbol_shift_derivatives(
    circuit: &Circuit,
    theta: &ParameterVector,
    input: &StateVector,
    observables: &[&DiagonalObservable],
    symbol: usize,
) -> Result<Vec<f64>> {
    check_input(circuit, theta, input)?;
    if symbol >= circuit.num_symbols() {
        return Err(QcnnError::Config(format!(
            "symbol {symbol} out of range for {} symbols",
            circuit.num_symbols()
        )));
    }
    let mut out = vec![0.0; observables.len()];
    let symbols = circuit.gates().filter_map(|g| g.symbol());
    for (k, s) in symbols.enumerate() {
        if s != symbol {
            continue;
        }
        let mut plus = input.clone();
        circuit.evolve(theta.as_slice(), &mut plus, Some((k, FRAC_PI_2)));
        let mut minus = input.clone();
        circuit.evolve(theta.as_slice(), &mut minus, Some((k, -FRAC_PI_2)));
        for (o, obs) in out.iter_mut().zip(observables) {
            *o += (obs.expectation(&plus) - obs.expectation(&minus)) / 2.0;
        }
    }
    Ok(out)
}

/// Expectation and its gradient from a reverse sweep. For a gate
/// `exp(−iθσ/2)` the occurrence derivative is `Im⟨λ|σ|ψ⟩`, with `ψ` the
/// state after the gate and `λ` the observable applied to the output and
/// propagated back to the same point.
pub fn adjoint_gradient(
    circuit: &Circuit,
    theta: &ParameterVector,
    input: &StateVector,
    obs: &DiagonalObservable,
) -> Result<(f64, Vec<f64>)> {
    check_input(circuit, theta, input)?;
    let theta = theta.as_slice();
    let mut psi = input.clone();
    circuit.evolve(theta, &mut psi, None);
    let value = obs.expectation(&psi);
    let mut lambda = psi.clone();
    obs.apply_into(&psi, &mut lambda);
    let mut scratch = psi.clone();

    let mut grad = vec![0.0; circuit.num_symbols()];
    let gates: Vec<_> = circuit.gates().collect();
    for op in gates.into_iter().rev() {
        let angle = Circuit::angle(op, theta);
        if let Some(s) = op.symbol() {
            let sigma = op.kind().generator().expect("symbols drive rotations");
            scratch.amplitudes_mut().copy_from_slice(psi.amplitudes());
            scratch.apply_matrix1(op.qubits()[0], &sigma)?;
            grad[s] += lambda.inner(&scratch).im;
        }
        psi.apply_unchecked(op, -angle);
        lambda.apply_unchecked(op, -angle);
    }
    Ok((value, grad))
}

/// Cost value and gradient for one sample.
pub fn expectation_gradient(
    model: &QcnnModel,
    theta: &ParameterVector,
    sample: &EncodedSample,
    kind: CostKind,
    method: Differentiator,
) -> Result<(f64, Vec<f64>)> {
    let obs = model.observable(kind);
    sample_gradient(model.circuit(), theta, &sample.to_state()?, &obs, method)
}

fn sample_gradient(
    circuit: &Circuit,
    theta: &ParameterVector,
    input: &StateVector,
    obs: &DiagonalObservable,
    method: Differentiator,
) -> Result<(f64, Vec<f64>)> {
    match method {
        Differentiator::Adjoint => adjoint_gradient(circuit, theta, input, obs),
        Differentiator::ParameterShift => {
            let value = obs.expectation(&circuit.run_pure(theta, input)?);
            Ok((value, shift_gradient(circuit, theta, input, obs)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGradient {
    pub loss: f64,
    pub gradient: Vec<f64>,
    /// Cost value of each sample, in batch order.
    pub scores: Vec<f64>,
}

/// Mean squared error over the batch and its gradient. Circuit derivatives
/// are chained through the outer `2(score − y)/B` factor. Per-sample work may
/// run in parallel; the reduction is always in batch order.
pub fn batch_gradient(
    model: &QcnnModel,
    theta: &ParameterVector,
    batch: &[EncodedSample],
    kind: CostKind,
    method: Differentiator,
) -> Result<LossAndGradient> {
    batch_gradient_with(model, &model.observable(kind), theta, batch, method)
}

pub(crate) fn batch_gradient_with(
    model: &QcnnModel,
    obs: &DiagonalObservable,
    theta: &ParameterVector,
    batch: &[EncodedSample],
    method: Differentiator,
) -> Result<LossAndGradient> {
    if batch.is_empty() {
        return Err(QcnnError::Empty("batch"));
    }
    model.circuit().check_theta(theta)?;
    let per_sample: Vec<Result<(f64, Vec<f64>)>> = batch
        .par_iter()
        .map(|s| sample_gradient(model.circuit(), theta, &s.to_state()?, obs, method))
        .collect();
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut gradient = vec![0.0; theta.len()];
    let mut scores = Vec::with_capacity(batch.len());
    for (sample, result) in batch.iter().zip(per_sample) {
        let (score, g) = result?;
        let err = score - f64::from(sample.label);
        loss += err * err;
        let outer = 2.0 * err / b;
        for (acc, gi) in gradient.iter_mut().zip(&g) {
            *acc += outer * gi;
        }
        scores.push(score);
    }
    Ok(LossAndGradient {
        loss: loss / b,
        gradient,
        scores,
    })
}

/// Gradient of the batch loss using the shift rule for every circuit
/// derivative.
pub fn parameter_shift_gradient(
    model: &QcnnModel,
    theta: &ParameterVector,
    batch: &[EncodedSample],
    kind: CostKind,
) -> Result<Vec<f64>> {
    Ok(batch_gradient(model, theta, batch, kind, Differentiator::ParameterShift)?.gradient)
}
