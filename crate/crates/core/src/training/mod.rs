//! Costs, gradients, Adam and the mini-batch training loop.

mod adam;
mod gradient;
mod observable;
mod train;

pub use adam::{adam_step, lr_at, AdamHyper, OptimizerState};
pub use gradient::{
    adjoint_gradient, batch_gradient, expectation_gradient, parameter_shift_gradient,
    shift_gradient, symbol_shift_derivatives, Differentiator, LossAndGradient,
};
pub use observable::DiagonalObservable;
pub use train::{
    read_metrics_csv, train, train_with_progress, write_metrics_csv, Checkpoint, EpochMetrics,
    TrainConfig, TrainOutcome, METRICS_SCHEMA,
};

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, EncodedSample, ParameterVector, QcnnPlan, RunOutput};
use crate::error::{QcnnError, Result};
use crate::sim::NoiseConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Local,
    Global,
}

impl std::str::FromStr for CostKind {
    type Err = QcnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "local" => Ok(CostKind::Local),
            "global" => Ok(CostKind::Global),
            other => Err(QcnnError::Config(format!("unknown cost kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for CostKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CostKind::Local => "local",
            CostKind::Global => "global",
        })
    }
}

/// `(1/m) Σ (1 − ⟨Z_i⟩)/2` over the survivors.
pub fn cost_local(output: &RunOutput, survivors: &[usize]) -> Result<f64> {
    if survivors.is_empty() {
        return Err(QcnnError::EmptySurvivors);
    }
    let mut sum = 0.0;
    for &q in survivors {
        sum += (1.0 - output.expectation_z(q)?) / 2.0;
    }
    Ok(sum / survivors.len() as f64)
}

/// `1 − P(all survivors read 0)`; zero when the survivors sit in `|0…0⟩`.
pub fn cost_global(output: &RunOutput, survivors: &[usize]) -> Result<f64> {
    Ok(1.0 - output.expectation_global_projector(survivors)?)
}

pub fn cost(kind: CostKind, output: &RunOutput, survivors: &[usize]) -> Result<f64> {
    match kind {
        CostKind::Local => cost_local(output, survivors),
        CostKind::Global => cost_global(output, survivors),
    }
}

/// A plan with its compiled circuit.
#[derive(Debug, Clone)]
pub struct QcnnModel {
    plan: QcnnPlan,
    circuit: Circuit,
}

impl QcnnModel {
    pub fn new(plan: QcnnPlan) -> Result<Self> {
        let circuit = plan.circuit()?;
        Ok(Self { plan, circuit })
    }

    pub fn plan(&self) -> &QcnnPlan {
        &self.plan
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn survivors(&self) -> &[usize] {
        self.plan.survivors()
    }

    pub fn num_parameters(&self) -> usize {
        self.plan.total_parameters
    }

    pub fn num_qubits(&self) -> usize {
        self.plan.num_qubits
    }

    pub fn observable(&self, kind: CostKind) -> DiagonalObservable {
        DiagonalObservable::for_cost(kind, self.num_qubits(), self.survivors())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub class: u8,
}

/// Class 1 when `score ≥ threshold`.
pub fn classify(score: f64, threshold: f64) -> u8 {
    u8::from(score >= threshold)
}

/// Scores a sample with the given cost observable and thresholds at 0.5
/// (a tie goes to class 1).
pub fn predict(
    model: &QcnnModel,
    theta: &ParameterVector,
    sample: &EncodedSample,
    noise: NoiseConfig,
    kind: CostKind,
) -> Result<Prediction> {
    let out = model.circuit.bind_and_run(theta, sample, noise)?;
    let score = cost(kind, &out, model.survivors())?;
    Ok(Prediction {
        score,
        class: classify(score, 0.5),
    })
}

/// `(1/B) Σ (score_b − y_b)²` on the noiseless path.
pub fn batch_loss(
    model: &QcnnModel,
    theta: &ParameterVector,
    batch: &[EncodedSample],
    kind: CostKind,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(QcnnError::Empty("batch"));
    }
    model.circuit.check_theta(theta)?;
    let obs = model.observable(kind);
    let mut sum = 0.0;
    for sample in batch {
        let psi = model.circuit.run_pure(theta, &sample.to_state()?)?;
        let err = obs.expectation(&psi) - f64::from(sample.label);
        sum += err * err;
    }
    Ok(sum / batch.len() as f64)
}

/// Accuracy and mean score of a set under optional noise.
pub fn evaluate(
    model: &QcnnModel,
    theta: &ParameterVector,
    samples: &[EncodedSample],
    noise: NoiseConfig,
    kind: CostKind,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(QcnnError::Empty("evaluation set"));
    }
    let mut correct = 0usize;
    let mut score_sum = 0.0;
    let mut loss_sum = 0.0;
    for sample in samples {
        let p = predict(model, theta, sample, noise, kind)?;
        correct += usize::from(p.class == sample.label);
        score_sum += p.score;
        loss_sum += (p.score - f64::from(sample.label)).powi(2);
    }
    let n = samples.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_score: score_sum / n,
        loss: loss_sum / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_score: f64,
    pub loss: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{amplitude_encode, build_qcnn, StageSchedule};
    use crate::sim::StateVector;
    use num_complex::Complex64 as C64;

    fn pure(psi: StateVector) -> RunOutput {
        RunOutput::Pure(psi)
    }

    fn basis(n: usize, index: usize) -> StateVector {
        let mut a = vec![0.0; 1 << n];
        a[index] = 1.0;
        StateVector::from_real(&a).unwrap()
    }

    #[test]
    fn local_cost_examples() {
        assert_eq!(cost_local(&pure(basis(3, 0)), &[0, 2]).unwrap(), 0.0);
        assert_eq!(cost_local(&pure(basis(3, 0b111)), &[0, 2]).unwrap(), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_real(&[h, h]).unwrap();
        assert!((cost_local(&pure(plus), &[0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            cost_local(&pure(basis(2, 0)), &[]),
            Err(QcnnError::EmptySurvivors)
        ));
    }

    #[test]
    fn global_cost_examples() {
        assert_eq!(cost_global(&pure(basis(3, 0)), &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(cost_global(&pure(basis(3, 0b111)), &[0, 1, 2]).unwrap(), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for m in 1..=4 {
            let plus = StateVector::product(&vec![[C64::new(h, 0.0), C64::new(h, 0.0)]; m]).unwrap();
            let all: Vec<usize> = (0..m).collect();
            let expect = 1.0 - 0.5f64.powi(m as i32);
            assert!((cost_global(&pure(plus), &all).unwrap() - expect).abs() < 1e-14);
        }
        assert!(cost_global(&pure(basis(2, 0)), &[]).is_err());
    }

    fn two_qubit_model() -> QcnnModel {
        let (plan, _) = build_qcnn(2, &StageSchedule::Halving { terminal: 1 }).unwrap();
        QcnnModel::new(plan).unwrap()
    }

    #[test]
    fn predict_examples() {
        let model = two_qubit_model();
        let zero = amplitude_encode(&[1.0], 2).unwrap();
        let theta = ParameterVector::zeros(5);
        let p = predict(&model, &theta, &zero, NoiseConfig::disabled(), CostKind::Local).unwrap();
        assert_eq!(p, Prediction { score: 0.0, class: 0 });

        // pool angle π flips the survivor when the control is |0⟩
        let mut flip = vec![0.0; 5];
        flip[4] = std::f64::consts::PI;
        let p = predict(&model, &flip.into(), &zero, NoiseConfig::disabled(), CostKind::Local).unwrap();
        assert!((p.score - 1.0).abs() < 1e-12);
        assert_eq!(p.class, 1);

        assert_eq!(classify(0.5, 0.5), 1);
        assert_eq!(classify(0.4999, 0.5), 0);
    }

    #[test]
    fn batch_loss_examples() {
        let model = two_qubit_model();
        let theta = ParameterVector::zeros(5);
        let zero = amplitude_encode(&[1.0], 2).unwrap();
        assert_eq!(batch_loss(&model, &theta, std::slice::from_ref(&zero), CostKind::Local).unwrap(), 0.0);
        let one = zero.clone().with_label(1);
        assert_eq!(batch_loss(&model, &theta, &[one], CostKind::Local).unwrap(), 1.0);
        assert!(batch_loss(&model, &theta, &[], CostKind::Local).is_err());

        // survivor qubit 1 at P(1) = 0.1 and 0.3 against label 0
        let mk = |p1: f64| {
            let a = (1.0 - p1).sqrt();
            let b = p1.sqrt();
            amplitude_encode(&[a, b], 2).unwrap()
        };
        let loss = batch_loss(&model, &theta, &[mk(0.1), mk(0.3)], CostKind::Local).unwrap();
        assert!((loss - 0.05).abs() < 1e-12);
    }

    #[test]
    fn threshold_rescaling_is_consistent() {
        for &s in &[0.0, 0.2, 0.5, 0.51, 0.9, 1.0] {
            for &c in &[0.1, 1.0, 3.7] {
                assert_eq!(classify(s, 0.5), classify(c * s, c * 0.5));
            }
        }
    }

    #[test]
    fn cost_parse_round_trip() {
        for k in [CostKind::Local, CostKind::Global] {
            assert_eq!(k.to_string().parse::<CostKind>().unwrap(), k);
        }
        assert!("both".parse::<CostKind>().is_err());
    }
}
