//! Acoustic front end: MFCC extraction, Δ/ΔΔ regression deltas and
//! stacked context windows.

mod context;
mod deltas;
mod io;
mod mfcc;

use ndarray::Array2;

pub use context::{build_context_windows, CW11_RADIUS};
pub use deltas::{append_deltas, regression_delta, DEFAULT_DELTA_RADIUS};
pub use io::{
    decode_features, encode_features, read_features, read_wav, write_features,
    write_features_csv, write_wav, FEATURE_MAGIC,
};
pub use mfcc::{extract_mfcc, extract_mfcc_f64, mel_filterbank, MfccConfig, Waveform, SAMPLE_RATE};

use crate::error::Result;

/// Dimension of one acoustic frame: 13 static + 13 Δ + 13 ΔΔ.
pub const FRAME_DIM: usize = 39;

/// Full 39-dim front end for one waveform.
pub fn acoustic_frames(waveform: &Waveform, config: &MfccConfig) -> Result<Array2<f64>> {
    let stat = extract_mfcc(waveform, config)?;
    append_deltas(&stat, DEFAULT_DELTA_RADIUS)
}

/// Front end used when pairing audio with 50 fps contours.
///
/// The tail is zero-padded by `window - hop` samples so that every hop
/// tile of the signal yields one frame (`floor(len / hop)` frames), which
/// lets two acoustic frames sit on each 20 ms image.
pub fn aligned_acoustic_frames(waveform: &Waveform, config: &MfccConfig) -> Result<Array2<f64>> {
    let pad = config.window_samples() - config.hop_samples();
    acoustic_frames(&waveform.padded(pad), config)
}
