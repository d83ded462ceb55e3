//! The four network variants in articulator-by-articulator (one model per
//! articulator) and all-articulators-together task modes.

use std::fmt;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Articulator, ARTICULATOR_DIM, CONTOUR_DIM, N_PHONES};
use crate::error::{Error, Result};
use crate::features::FRAME_DIM;
use crate::metrics::{combined_loss, mse_loss, one_hot_rows, softmax, ClassificationBatch, RegressionBatch};
use crate::nn::{
    read_checkpoint, write_checkpoint, Activation, BiLstm, BiLstmTrace, Dense, Differentiable, Gradient,
    ParameterStore,
};

pub const DEFAULT_HIDDEN_WIDTH: usize = 300;
/// Input width with an 11-frame context window.
pub const CONTEXT_INPUT_DIM: usize = 11 * FRAME_DIM;

/// Parameter count of ST-5 in AAT mode on 39-dim input with 300 hidden units.
pub const ST5_AAT_PARAMETERS: usize = 4_187_900;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "ST-5")]
    St5,
    #[serde(rename = "ST-8")]
    St8,
    #[serde(rename = "MT-5")]
    Mt5,
    #[serde(rename = "ST-5-cw11")]
    St5Cw11,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::St5, Variant::St8, Variant::Mt5, Variant::St5Cw11];

    pub fn name(self) -> &'static str {
        match self {
            Variant::St5 => "ST-5",
            Variant::St8 => "ST-8",
            Variant::Mt5 => "MT-5",
            Variant::St5Cw11 => "ST-5-cw11",
        }
    }

    pub fn input_dim(self) -> usize {
        match self {
            Variant::St5Cw11 => CONTEXT_INPUT_DIM,
            _ => FRAME_DIM,
        }
    }

    pub fn is_multitask(self) -> bool {
        self == Variant::Mt5
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = |t: &str| t.to_ascii_lowercase().replace(['-', '_'], "");
        Variant::ALL
            .into_iter()
            .find(|v| key(v.name()) == key(s))
            .ok_or_else(|| Error::BadSpec(format!("unknown model variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "approach", content = "articulator")]
pub enum TaskMode {
    /// A model predicting only one articulator.
    #[serde(rename = "ABA")]
    Aba(Articulator),
    /// A model predicting all eight articulators.
    #[serde(rename = "AAT")]
    Aat,
}

impl TaskMode {
    pub fn output_dim(self) -> usize {
        match self {
            TaskMode::Aba(_) => ARTICULATOR_DIM,
            TaskMode::Aat => CONTOUR_DIM,
        }
    }

    pub fn approach(self) -> &'static str {
        match self {
            TaskMode::Aba(_) => "ABA",
            TaskMode::Aat => "AAT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    pub task_mode: TaskMode,
    pub input_dim: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    /// Classification head width; MT-5 only.
    pub n_phones: Option<usize>,
}

impl ModelSpec {
    pub fn new(variant: Variant, task_mode: TaskMode, hidden_width: usize) -> ModelSpec {
        ModelSpec {
            variant,
            task_mode,
            input_dim: variant.input_dim(),
            hidden_width,
            output_dim: task_mode.output_dim(),
            n_phones: variant.is_multitask().then_some(N_PHONES),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadSpec(m));
        if self.input_dim != self.variant.input_dim() {
            return bad(format!(
                "{} expects {}-dim input, got {}",
                self.variant,
                self.variant.input_dim(),
                self.input_dim
            ));
        }
        if self.output_dim != self.task_mode.output_dim() {
            return bad(format!(
                "{} output must be {}-dim, got {}",
                self.task_mode.approach(),
                self.task_mode.output_dim(),
                self.output_dim
            ));
        }
        if self.hidden_width == 0 {
            return bad("hidden width must be positive".into());
        }
        match (self.variant.is_multitask(), self.n_phones) {
            (true, Some(N_PHONES)) | (false, None) => Ok(()),
            (true, other) => bad(format!("MT-5 needs a {N_PHONES}-way phone head, got {other:?}")),
            (false, Some(_)) => bad(format!("{} has no phone head", self.variant)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// `T × output_dim`, normalized coordinates.
    pub contours: Array2<f64>,
    /// `T × 44` phone distributions (MT-5).
    pub phone_probs: Option<Array2<f64>>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    state: Option<TapeState>,
}

#[derive(Debug, Clone)]
struct TapeState {
    input: Array2<f64>,
    dense1: Array2<f64>,
    dense2: Array2<f64>,
    lstm1: BiLstmTrace,
    lstm2: BiLstmTrace,
    /// Outputs of the ST-8 stack, in order.
    extra: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn is_empty(&self) -> bool {
        self.state.is_none()
    }
}

/// Gradients arriving at the model outputs.
pub struct Upstream {
    pub d_contours: Array2<f64>,
    pub d_logits: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    store: ParameterStore,
    dense1: Dense,
    dense2: Dense,
    lstm1: BiLstm,
    lstm2: BiLstm,
    extra: Vec<Dense>,
    output: Dense,
    phone_head: Option<Dense>,
}

/// One utterance's inputs and normalized targets for loss evaluation.
#[derive(Debug, Clone)]
pub struct Example {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Example {
    /// Uniform ±1 inputs and targets with labels spread over the phone set,
    /// shaped for `spec`.
    pub fn random(spec: &ModelSpec, frames: usize, seed: u64) -> Example {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = Array2::from_shape_fn((frames, spec.input_dim), |_| rng.random_range(-1.0..1.0));
        let targets = Array2::from_shape_fn((frames, spec.output_dim), |_| rng.random_range(-1.0..1.0));
        let labels = (0..frames).map(|_| rng.random_range(0..N_PHONES)).collect();
        Example { inputs, targets, labels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mse: f64,
    pub cross_entropy: Option<f64>,
}

impl Model {
    pub fn build(spec: ModelSpec, seed: u64) -> Result<Model> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParameterStore::new();
        let h = spec.hidden_width;
        let dense1 = Dense::new(&mut store, "dense1", spec.input_dim, h, Activation::Tanh, &mut rng);
        let dense2 = Dense::new(&mut store, "dense2", h, h, Activation::Tanh, &mut rng);
        let lstm1 = BiLstm::new(&mut store, "bilstm1", h, h, &mut rng);
        let lstm2 = BiLstm::new(&mut store, "bilstm2", 2 * h, h, &mut rng);
        let mut extra = Vec::new();
        if spec.variant == Variant::St8 {
            let out = spec.output_dim;
            let acts = [Activation::Tanh, Activation::Tanh, Activation::Identity];
            let mut width = 2 * h;
            for (i, act) in acts.into_iter().enumerate() {
                extra.push(Dense::new(&mut store, &format!("extra{}", i + 1), width, out, act, &mut rng));
                width = out;
            }
        }
        let head_in = extra.last().map_or(2 * h, |d| d.out_dim);
        let output = Dense::new(&mut store, "output", head_in, spec.output_dim, Activation::Identity, &mut rng);
        let phone_head = spec
            .n_phones
            .map(|n| Dense::new(&mut store, "phones", 2 * h, n, Activation::Identity, &mut rng));
        Ok(Model {
            spec,
            store,
            dense1,
            dense2,
            lstm1,
            lstm2,
            extra,
            output,
            phone_head,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn parameter_count(&self) -> usize {
        self.store.len()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(ModelOutput, Tape)> {
        if x.ncols() != self.spec.input_dim {
            return Err(Error::Dimension {
                context: "model input",
                expected: self.spec.input_dim,
                got: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        let s = &self.store;
        let dense1 = self.dense1.forward(s, x)?;
        let dense2 = self.dense2.forward(s, dense1.view())?;
        let lstm1 = self.lstm1.forward(s, dense2.view())?;
        let lstm2 = self.lstm2.forward(s, lstm1.output.view())?;
        let mut extra: Vec<Array2<f64>> = Vec::with_capacity(self.extra.len());
        for layer in &self.extra {
            let prev = extra.last().unwrap_or(&lstm2.output);
            let y = layer.forward(s, prev.view())?;
            extra.push(y);
        }
        let output = self
            .output
            .forward(s, extra.last().unwrap_or(&lstm2.output).view())?;
        let phone_probs = match &self.phone_head {
            Some(head) => Some(softmax(head.forward(s, lstm2.output.view())?.view())),
            None => None,
        };
        let out = ModelOutput {
            contours: output.clone(),
            phone_probs,
        };
        let tape = Tape {
            state: Some(TapeState {
                input: x.to_owned(),
                dense1,
                dense2,
                lstm1,
                lstm2,
                extra,
                output,
            }),
        };
        Ok((out, tape))
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<ModelOutput> {
        Ok(self.forward(x)?.0)
    }

    /// Gradient of the loss with respect to every parameter, given the
    /// gradients at the regression output and (MT-5) at the phone logits.
    pub fn backward(&self, tape: &Tape, upstream: Upstream) -> Result<Gradient> {
        let st = tape.state.as_ref().ok_or(Error::NoForwardState)?;
        let s = &self.store;
        let mut grad = s.zero_gradient();
        let head_in = st.extra.last().unwrap_or(&st.lstm2.output);
        let mut d = self
            .output
            .backward(s, head_in.view(), st.output.view(), upstream.d_contours, &mut grad);
        for (i, layer) in self.extra.iter().enumerate().rev() {
            let x = if i == 0 { &st.lstm2.output } else { &st.extra[i - 1] };
            d = layer.backward(s, x.view(), st.extra[i].view(), d, &mut grad);
        }
        if let (Some(head), Some(d_logits)) = (&self.phone_head, upstream.d_logits) {
            // Identity activation: the stored output is unused by backprop.
            let logits_shape = Array2::zeros((0, 0));
            d = d + head.backward(s, st.lstm2.output.view(), logits_shape.view(), d_logits, &mut grad);
        }
        let d = self
            .lstm2
            .backward(s, st.lstm1.output.view(), &st.lstm2, d.view(), &mut grad);
        let d = self
            .lstm1
            .backward(s, st.dense2.view(), &st.lstm1, d.view(), &mut grad);
        let d = self
            .dense2
            .backward(s, st.dense1.view(), st.dense2.view(), d, &mut grad);
        self.dense1
            .backward(s, st.input.view(), st.dense1.view(), d, &mut grad);
        Ok(grad)
    }

    /// Per-utterance training loss: MSE over all output scalars, plus the
    /// per-frame cross-entropy for MT-5.
    pub fn loss_of(&self, output: &ModelOutput, targets: ArrayView2<'_, f64>, labels: &[usize]) -> Result<(LossBreakdown, Upstream)> {
        let reg = RegressionBatch {
            truth: targets,
            pred: output.contours.view(),
        };
        match &output.phone_probs {
            Some(probs) => {
                let one_hot = one_hot_rows(labels, N_PHONES)?;
                let l = combined_loss(
                    reg,
                    ClassificationBatch {
                        labels: one_hot.view(),
                        probs: probs.view(),
                    },
                )?;
                Ok((
                    LossBreakdown {
                        total: l.value,
                        mse: l.mse,
                        cross_entropy: Some(l.cross_entropy),
                    },
                    Upstream {
                        d_contours: l.grad_pred,
                        d_logits: Some(l.grad_logits),
                    },
                ))
            }
            None => {
                let l = mse_loss(reg)?;
                Ok((
                    LossBreakdown {
                        total: l.value,
                        mse: l.value,
                        cross_entropy: None,
                    },
                    Upstream {
                        d_contours: l.grad,
                        d_logits: None,
                    },
                ))
            }
        }
    }

    pub fn evaluate_loss(&self, inputs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, labels: &[usize]) -> Result<LossBreakdown> {
        let out = self.predict(inputs)?;
        Ok(self.loss_of(&out, targets, labels)?.0)
    }

    pub fn loss_and_gradient_on(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        labels: &[usize],
    ) -> Result<(LossBreakdown, Gradient)> {
        let (out, tape) = self.forward(inputs)?;
        let (loss, upstream) = self.loss_of(&out, targets, labels)?;
        Ok((loss, self.backward(&tape, upstream)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_checkpoint(path, &self.spec, &self.store)
    }

    /// Rebuilds the architecture from the stored spec and loads its values.
    pub fn load(path: &Path) -> Result<Model> {
        let ckpt = read_checkpoint::<ModelSpec>(path)?;
        let mut model = Model::build(ckpt.header, 0)?;
        ckpt.restore_into(&mut model.store, path)?;
        Ok(model)
    }
}

impl Differentiable for Model {
    type Sample = Example;

    fn parameters(&self) -> &ParameterStore {
        &self.store
    }

    fn parameters_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    fn loss(&self, sample: &Example) -> Result<f64> {
        Ok(self
            .evaluate_loss(sample.inputs.view(), sample.targets.view(), &sample.labels)?
            .total)
    }

    fn loss_and_gradient(&self, sample: &Example) -> Result<(f64, Gradient)> {
        let (l, g) = self.loss_and_gradient_on(sample.inputs.view(), sample.targets.view(), &sample.labels)?;
        Ok((l.total, g))
    }
}
