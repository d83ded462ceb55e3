//! Small deterministic neural substrate: dense and LSTM layers over a flat
//! parameter store, hand-written backpropagation and a finite-difference
//! gradient checker.

mod checkpoint;
mod dense;
mod gradcheck;
mod lstm;
mod params;
mod probe;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC,
};
pub use dense::{dense_forward, Activation, Dense, DenseParams};
pub use gradcheck::{check_coordinates, gradient_check, Differentiable, GradCheckReport, MIN_CHECKED, REL_ERROR_FLOOR};
pub use lstm::{bilstm_forward, lstm_step, BiLstm, BiLstmTrace, Gate, Lstm, LstmParams, LstmTrace};
pub use params::{Gradient, ParameterStore, Slot, SlotId};
pub use probe::{LayerProbe, ProbeKind, ProbeSample};
