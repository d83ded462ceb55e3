//! Single-layer harnesses for finite-difference gradient checks.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::{Activation, Dense};
use super::gradcheck::Differentiable;
use super::lstm::{BiLstm, Lstm};
use super::params::{Gradient, ParameterStore};
use crate::error::{Error, Result};
use crate::metrics::{cross_entropy_loss, mse_loss, one_hot_rows, softmax, ClassificationBatch, RegressionBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Dense,
    LstmCell,
    BiLstm,
    SoftmaxCrossEntropy,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 4] = [
        ProbeKind::Dense,
        ProbeKind::LstmCell,
        ProbeKind::BiLstm,
        ProbeKind::SoftmaxCrossEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Dense => "dense",
            ProbeKind::LstmCell => "lstm-cell",
            ProbeKind::BiLstm => "bilstm",
            ProbeKind::SoftmaxCrossEntropy => "softmax-ce",
        }
    }
}

impl fmt::Display for ProbeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProbeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown layer probe '{s}'")))
    }
}

enum Layer {
    Dense(Dense),
    Lstm(Lstm),
    BiLstm(BiLstm),
}

/// One layer with a scalar loss on top: MSE against random targets for
/// the regression layers, softmax + cross-entropy on the logits of a
/// linear layer for the classifier.
pub struct LayerProbe {
    pub kind: ProbeKind,
    store: ParameterStore,
    layer: Layer,
    pub input_dim: usize,
    pub output_dim: usize,
}

pub struct ProbeSample {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub labels: Vec<usize>,
}

impl LayerProbe {
    /// For the BiLSTM `output_dim` is the per-direction width.
    pub fn new(kind: ProbeKind, input_dim: usize, output_dim: usize, seed: u64) -> LayerProbe {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let layer = match kind {
            ProbeKind::Dense => Layer::Dense(Dense::new(&mut store, "dense", input_dim, output_dim, Activation::Tanh, &mut rng)),
            ProbeKind::LstmCell => Layer::Lstm(Lstm::new(&mut store, "lstm", input_dim, output_dim, false, &mut rng)),
            ProbeKind::BiLstm => Layer::BiLstm(BiLstm::new(&mut store, "bilstm", input_dim, output_dim, &mut rng)),
            ProbeKind::SoftmaxCrossEntropy => {
                Layer::Dense(Dense::new(&mut store, "logits", input_dim, output_dim, Activation::Identity, &mut rng))
            }
        };
        // Non-zero biases so their gradients are exercised away from the origin.
        for v in store.values_mut().iter_mut().filter(|v| **v == 0.0) {
            *v = rng.random_range(-0.5..0.5);
        }
        let output_dim = if kind == ProbeKind::BiLstm { 2 * output_dim } else { output_dim };
        LayerProbe {
            kind,
            store,
            layer,
            input_dim,
            output_dim,
        }
    }

    /// Random inputs in ±1, targets in ±1 and labels over the output classes.
    pub fn random_sample(&self, frames: usize, seed: u64) -> ProbeSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = Array2::from_shape_fn((frames, self.input_dim), |_| rng.random_range(-1.0..1.0));
        let targets = Array2::from_shape_fn((frames, self.output_dim), |_| rng.random_range(-1.0..1.0));
        let labels = (0..frames).map(|_| rng.random_range(0..self.output_dim)).collect();
        ProbeSample { inputs, targets, labels }
    }

    fn run(&self, sample: &ProbeSample, want_grad: bool) -> Result<(f64, Option<Gradient>)> {
        let x = sample.inputs.view();
        let mut grad = self.store.zero_gradient();
        let loss = match &self.layer {
            Layer::Dense(d) if self.kind == ProbeKind::SoftmaxCrossEntropy => {
                let logits = d.forward(&self.store, x)?;
                let labels = one_hot_rows(&sample.labels, self.output_dim)?;
                let probs = softmax(logits.view());
                let ce = cross_entropy_loss(ClassificationBatch {
                    labels: labels.view(),
                    probs: probs.view(),
                })?;
                if want_grad {
                    d.backward(&self.store, x, logits.view(), ce.grad_logits, &mut grad);
                }
                ce.total
            }
            Layer::Dense(d) => {
                let y = d.forward(&self.store, x)?;
                let l = mse_loss(RegressionBatch {
                    truth: sample.targets.view(),
                    pred: y.view(),
                })?;
                if want_grad {
                    d.backward(&self.store, x, y.view(), l.grad, &mut grad);
                }
                l.value
            }
            Layer::Lstm(lstm) => {
                let trace = lstm.forward(&self.store, x)?;
                let l = mse_loss(RegressionBatch {
                    truth: sample.targets.view(),
                    pred: trace.hidden.view(),
                })?;
                if want_grad {
                    lstm.backward(&self.store, x, &trace, l.grad.view(), &mut grad);
                }
                l.value
            }
            Layer::BiLstm(bi) => {
                let trace = bi.forward(&self.store, x)?;
                let l = mse_loss(RegressionBatch {
                    truth: sample.targets.view(),
                    pred: trace.output.view(),
                })?;
                if want_grad {
                    bi.backward(&self.store, x, &trace, l.grad.view(), &mut grad);
                }
                l.value
            }
        };
        Ok((loss, want_grad.then_some(grad)))
    }
}

impl Differentiable for LayerProbe {
    type Sample = ProbeSample;

    fn parameters(&self) -> &ParameterStore {
        &self.store
    }

    fn parameters_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    fn loss(&self, sample: &ProbeSample) -> Result<f64> {
        Ok(self.run(sample, false)?.0)
    }

    fn loss_and_gradient(&self, sample: &ProbeSample) -> Result<(f64, Gradient)> {
        let (loss, grad) = self.run(sample, true)?;
        Ok((loss, grad.expect("gradient requested")))
    }
}
