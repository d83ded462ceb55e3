use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

/// Doubles a 50 fps contour sequence to the 10 ms acoustic frame rate.
///
/// Each consecutive pair gets their pointwise mean inserted between them
/// (`2N - 1` frames). A target of `2N` additionally repeats the last frame.
pub fn upsample_contours(contours: &Array2<f64>, target_count: usize) -> Result<Array2<f64>> {
    let (n, dim) = contours.dim();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    if target_count != 2 * n - 1 && target_count != 2 * n {
        return Err(Error::AlignmentMismatch {
            contours: n,
            target: target_count,
        });
    }
    let mut out = Array2::zeros((target_count, dim));
    for i in 0..n {
        out.row_mut(2 * i).assign(&contours.row(i));
        if i + 1 < n {
            Zip::from(out.row_mut(2 * i + 1))
                .and(contours.row(i))
                .and(contours.row(i + 1))
                .for_each(|o, &a, &b| *o = 0.5 * (a + b));
        }
    }
    if target_count == 2 * n {
        out.row_mut(2 * n - 1).assign(&contours.row(n - 1));
    }
    Ok(out)
}
