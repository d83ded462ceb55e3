//! LSTM cells and the bidirectional wrapper.
//!
//! Gate pre-activations are stacked as `[input, forget, cell, output]`
//! blocks of `hidden` rows each:
//!
//! ```text
//! i, f, o = sigmoid(.)   g = tanh(.)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use ndarray::linalg::{general_mat_mul, general_mat_vec_mul};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis};
use rand::Rng;

use super::params::{Gradient, ParameterStore, SlotId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Cell = 2,
    Output = 3,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Owned weights of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H × input`
    pub w_input: Array2<f64>,
    /// `4H × H`
    pub w_hidden: Array2<f64>,
    /// `4H`
    pub bias: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_input: Array2::zeros((4 * hidden, input)),
            w_hidden: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }

    /// Bias entries of one gate.
    pub fn gate_bias_mut(&mut self, gate: Gate) -> ArrayViewMut1<'_, f64> {
        let h = self.hidden();
        let g = gate as usize;
        self.bias.slice_mut(s![g * h..(g + 1) * h])
    }
}

/// Activates stacked pre-activations in place.
fn activate_gates(mut z: ArrayViewMut1<'_, f64>, hidden: usize) {
    for (k, v) in z.iter_mut().enumerate() {
        *v = if k / hidden == Gate::Cell as usize {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
}

/// One time step: returns `(h_t, c_t)`.
pub fn lstm_step(
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
    params: &LstmParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let h = params.hidden();
    let check = |context, expected, got| {
        if expected != got {
            Err(Error::Dimension {
                context,
                expected,
                got,
            })
        } else {
            Ok(())
        }
    };
    check("lstm input", params.w_input.ncols(), x.len())?;
    check("lstm hidden state", h, h_prev.len())?;
    check("lstm cell state", h, c_prev.len())?;
    check("lstm bias", 4 * h, params.bias.len())?;
    let mut z = params.w_input.dot(&x) + params.w_hidden.dot(&h_prev) + &params.bias;
    activate_gates(z.view_mut(), h);
    let gate = |g: Gate| z.slice(s![g as usize * h..(g as usize + 1) * h]);
    let c = &gate(Gate::Forget) * &c_prev + &gate(Gate::Input) * &gate(Gate::Cell);
    let h_t = &gate(Gate::Output) * &c.mapv(f64::tanh);
    Ok((h_t, c))
}

/// Activations of one direction over a whole sequence, in time order.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Activated gates, `T × 4H`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    pub hidden: Array2<f64>,
}

/// One LSTM direction with parameters in a [`ParameterStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    w_input: SlotId,
    w_hidden: SlotId,
    bias: SlotId,
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Processes `t = T..1` when set.
    pub reverse: bool,
}

impl Lstm {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        reverse: bool,
        rng: &mut R,
    ) -> Lstm {
        Lstm {
            w_input: store.add_matrix(&format!("{name}.w_input"), 4 * hidden_dim, input_dim, rng),
            w_hidden: store.add_matrix(&format!("{name}.w_hidden"), 4 * hidden_dim, hidden_dim, rng),
            bias: store.add_vector(&format!("{name}.bias"), 4 * hidden_dim),
            input_dim,
            hidden_dim,
            reverse,
        }
    }

    pub fn params(&self, store: &ParameterStore) -> LstmParams {
        LstmParams {
            w_input: store.matrix(self.w_input).to_owned(),
            w_hidden: store.matrix(self.w_hidden).to_owned(),
            bias: store.vector(self.bias).to_owned(),
        }
    }

    pub fn set_params(&self, store: &mut ParameterStore, params: &LstmParams) {
        store.matrix_mut(self.w_input).assign(&params.w_input);
        store.matrix_mut(self.w_hidden).assign(&params.w_hidden);
        store.vector_mut(self.bias).assign(&params.bias);
    }

    fn order(&self, len: usize) -> Box<dyn Iterator<Item = usize>> {
        if self.reverse {
            Box::new((0..len).rev())
        } else {
            Box::new(0..len)
        }
    }

    pub fn forward(&self, store: &ParameterStore, x: ArrayView2<'_, f64>) -> Result<LstmTrace> {
        if x.ncols() != self.input_dim {
            return Err(Error::Dimension {
                context: "lstm input",
                expected: self.input_dim,
                got: x.ncols(),
            });
        }
        let (t_len, h) = (x.nrows(), self.hidden_dim);
        let w_hidden = store.matrix(self.w_hidden);
        // Input projections for all steps at once; the recurrence adds W_h·h.
        let mut gates = x.dot(&store.matrix(self.w_input).t()) + &store.vector(self.bias);
        let mut cells = Array2::zeros((t_len, h));
        let mut tanh_cells = Array2::zeros((t_len, h));
        let mut hidden = Array2::zeros((t_len, h));
        let mut h_prev = Array1::<f64>::zeros(h);
        let mut c_prev = Array1::<f64>::zeros(h);
        for t in self.order(t_len) {
            let mut z = gates.row_mut(t);
            general_mat_vec_mul(1.0, &w_hidden, &h_prev, 1.0, &mut z);
            activate_gates(z.view_mut(), h);
            let z = gates.row(t);
            for k in 0..h {
                let c = z[h + k] * c_prev[k] + z[k] * z[2 * h + k];
                let tc = c.tanh();
                cells[[t, k]] = c;
                tanh_cells[[t, k]] = tc;
                hidden[[t, k]] = z[3 * h + k] * tc;
            }
            h_prev.assign(&hidden.row(t));
            c_prev.assign(&cells.row(t));
        }
        Ok(LstmTrace {
            gates,
            cells,
            tanh_cells,
            hidden,
        })
    }

    /// Backpropagation through time. `dh` is `dL/dh_t` from the layers
    /// above; returns `dL/dx`.
    pub fn backward(
        &self,
        store: &ParameterStore,
        x: ArrayView2<'_, f64>,
        trace: &LstmTrace,
        dh: ArrayView2<'_, f64>,
        grad: &mut Gradient,
    ) -> Array2<f64> {
        let (t_len, h) = (x.nrows(), self.hidden_dim);
        let w_hidden = store.matrix(self.w_hidden);
        let mut dz = Array2::zeros((t_len, 4 * h));
        // Hidden state fed into each step (zero for the first processed step).
        let mut h_in = Array2::zeros((t_len, h));
        let mut dh_next = Array1::<f64>::zeros(h);
        let mut dc_next = Array1::<f64>::zeros(h);
        let steps: Vec<usize> = self.order(t_len).collect();
        for (pos, &t) in steps.iter().enumerate().rev() {
            let prev = (pos > 0).then(|| steps[pos - 1]);
            if let Some(p) = prev {
                h_in.row_mut(t).assign(&trace.hidden.row(p));
            }
            let g = trace.gates.row(t);
            let mut dzt = dz.row_mut(t);
            for k in 0..h {
                let (i, f, c_hat, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = trace.tanh_cells[[t, k]];
                let c_prev = prev.map_or(0.0, |p| trace.cells[[p, k]]);
                let dht = dh[[t, k]] + dh_next[k];
                let dc = dht * o * (1.0 - tc * tc) + dc_next[k];
                dzt[k] = dc * c_hat * i * (1.0 - i);
                dzt[h + k] = dc * c_prev * f * (1.0 - f);
                dzt[2 * h + k] = dc * i * (1.0 - c_hat * c_hat);
                dzt[3 * h + k] = dht * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            general_mat_vec_mul(1.0, &w_hidden.t(), &dz.row(t), 0.0, &mut dh_next);
        }
        general_mat_mul(1.0, &dz.t(), &x, 1.0, &mut grad.matrix_mut(self.w_input));
        general_mat_mul(1.0, &dz.t(), &h_in, 1.0, &mut grad.matrix_mut(self.w_hidden));
        grad.vector_mut(self.bias).scaled_add(1.0, &dz.sum_axis(Axis(0)));
        dz.dot(&store.matrix(self.w_input))
    }
}

/// Forward and backward LSTMs whose outputs are concatenated per step.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    fwd: LstmTrace,
    bwd: LstmTrace,
    /// `T × 2H`: `[h_fwd, h_bwd]` per step.
    pub output: Array2<f64>,
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> BiLstm {
        BiLstm {
            forward: Lstm::new(store, &format!("{name}.fwd"), input_dim, hidden_dim, false, rng),
            backward: Lstm::new(store, &format!("{name}.bwd"), input_dim, hidden_dim, true, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }

    pub fn forward(&self, store: &ParameterStore, x: ArrayView2<'_, f64>) -> Result<BiLstmTrace> {
        if x.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        let fwd = self.forward.forward(store, x)?;
        let bwd = self.backward.forward(store, x)?;
        let output = ndarray::concatenate![Axis(1), fwd.hidden, bwd.hidden];
        Ok(BiLstmTrace { fwd, bwd, output })
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        x: ArrayView2<'_, f64>,
        trace: &BiLstmTrace,
        dy: ArrayView2<'_, f64>,
        grad: &mut Gradient,
    ) -> Array2<f64> {
        let h = self.forward.hidden_dim;
        let dx_f = self
            .forward
            .backward(store, x, &trace.fwd, dy.slice(s![.., ..h]), grad);
        let dx_b = self
            .backward
            .backward(store, x, &trace.bwd, dy.slice(s![.., h..]), grad);
        dx_f + dx_b
    }
}

/// Runs a bidirectional pass with explicit per-direction parameters.
pub fn bilstm_forward(
    seq: ArrayView2<'_, f64>,
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> Result<Array2<f64>> {
    if seq.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut store = ParameterStore::new();
    let layer = BiLstm::new(&mut store, "bilstm", seq.ncols(), fwd.hidden(), &mut rng);
    layer.forward.set_params(&mut store, fwd);
    layer.backward.set_params(&mut store, bwd);
    Ok(layer.forward(&store, seq)?.output)
}
