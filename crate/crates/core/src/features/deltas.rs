use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_DELTA_RADIUS: usize = 2;

/// Regression-filter time derivative with replicated edge frames.
pub fn regression_delta(seq: ArrayView2<'_, f64>, radius: usize) -> Array2<f64> {
    let t_len = seq.nrows() as isize;
    let denom = 2.0 * (1..=radius).map(|k| (k * k) as f64).sum::<f64>();
    let clamp = |t: isize| t.clamp(0, t_len - 1) as usize;
    let mut out = Array2::zeros(seq.raw_dim());
    for t in 0..t_len {
        let mut row = out.row_mut(t as usize);
        for k in 1..=radius as isize {
            let ahead = seq.row(clamp(t + k));
            let behind = seq.row(clamp(t - k));
            row.zip_mut_with(&(&ahead - &behind), |o, d| *o += k as f64 * d);
        }
        row.mapv_inplace(|v| v / denom);
    }
    out
}

/// Stacks static cepstra with their Δ and ΔΔ: `T × d` becomes `T × 3d`.
pub fn append_deltas(static_coeffs: &Array2<f64>, delta_radius: usize) -> Result<Array2<f64>> {
    if static_coeffs.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    if delta_radius == 0 {
        return Err(Error::Config("delta radius must be at least 1".into()));
    }
    let delta = regression_delta(static_coeffs.view(), delta_radius);
    let delta2 = regression_delta(delta.view(), delta_radius);
    Ok(concatenate![Axis(1), *static_coeffs, delta, delta2])
}
