use ndarray::{s, Array2};

use crate::error::{Error, Result};

/// Context radius of the 11-frame window variant.
pub const CW11_RADIUS: usize = 5;

/// Concatenates frames `t-radius ..= t+radius` for every `t`, replicating
/// the boundary frames where the window runs off either end.
pub fn build_context_windows(frames: &Array2<f64>, radius: usize) -> Result<Array2<f64>> {
    let (t_len, dim) = frames.dim();
    if t_len == 0 {
        return Err(Error::EmptySequence);
    }
    let width = 2 * radius + 1;
    let mut out = Array2::zeros((t_len, width * dim));
    for t in 0..t_len {
        for (slot, offset) in (0..width).zip(-(radius as isize)..) {
            let src = (t as isize + offset).clamp(0, t_len as isize - 1) as usize;
            out.slice_mut(s![t, slot * dim..(slot + 1) * dim])
                .assign(&frames.row(src));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_zero_is_identity() {
        let f = Array2::from_shape_fn((6, 39), |(t, d)| (t * 100 + d) as f64);
        assert_eq!(build_context_windows(&f, 0).unwrap(), f);
    }

    #[test]
    fn radius_five_gives_429_values() {
        let f = Array2::<f64>::zeros((3, 39));
        assert_eq!(build_context_windows(&f, CW11_RADIUS).unwrap().ncols(), 429);
    }

    #[test]
    fn first_frame_replicates_left_edge() {
        let f = Array2::from_shape_fn((10, 39), |(t, d)| (t * 1000 + d) as f64);
        let out = build_context_windows(&f, 5).unwrap();
        // Brute-force construction of the expected window.
        let order = [0, 0, 0, 0, 0, 0, 1, 2, 3, 4, 5];
        let expected: Vec<f64> = order
            .iter()
            .flat_map(|&i| f.row(i).to_vec())
            .collect();
        assert_eq!(out.row(0).to_vec(), expected);
        let last: Vec<f64> = [4, 5, 6, 7, 8, 9, 9, 9, 9, 9, 9]
            .iter()
            .flat_map(|&i| f.row(i).to_vec())
            .collect();
        assert_eq!(out.row(9).to_vec(), last);
    }

    #[test]
    fn empty_errors() {
        assert!(build_context_windows(&Array2::zeros((0, 39)), 5).is_err());
    }
}
