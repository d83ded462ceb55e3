use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StatsScope {
    /// Fitted once over all training acoustic frames.
    GlobalMfcc,
    /// Fitted over recordings `first..=last` around `center`.
    ContourWindow {
        center: usize,
        first: usize,
        last: usize,
    },
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    pub scope: StatsScope,
}

impl NormalizationStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, frames: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_dim(frames.ncols())?;
        Ok((frames - &self.mean) / &self.std)
    }

    pub fn denormalize(&self, frames: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_dim(frames.ncols())?;
        Ok(frames * &self.std + &self.mean)
    }

    /// Restriction to dimensions `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> NormalizationStats {
        NormalizationStats {
            mean: self.mean.slice(ndarray::s![range.clone()]).to_owned(),
            std: self.std.slice(ndarray::s![range]).to_owned(),
            scope: self.scope.clone(),
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::Dimension {
                context: "normalization stats",
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

fn floor_std(var: Array1<f64>) -> Array1<f64> {
    let floored = var.iter().filter(|&&v| v.sqrt() < STD_FLOOR).count();
    if floored > 0 {
        log::warn!("{floored} zero-variance dimension(s); std floored at {STD_FLOOR}");
    }
    var.mapv(|v| v.max(0.0).sqrt().max(STD_FLOOR))
}

/// Global z-score statistics over the training acoustic frames.
pub fn fit_mfcc_stats(frames: ArrayView2<'_, f64>) -> Result<NormalizationStats> {
    if frames.nrows() < 2 {
        return Err(Error::EmptySplit("need at least 2 frames to fit normalization"));
    }
    let mean = frames.mean_axis(Axis(0)).expect("non-empty");
    let var = frames.var_axis(Axis(0), 0.0);
    Ok(NormalizationStats {
        mean,
        std: floor_std(var),
        scope: StatsScope::GlobalMfcc,
    })
}

pub fn normalize_mfcc(frames: &Array2<f64>, stats: &NormalizationStats) -> Result<Array2<f64>> {
    stats.normalize(frames)
}

/// Frame count, mean and sum of squared deviations of one recording.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Array1<f64>,
    m2: Array1<f64>,
}

impl Moments {
    fn of(frames: &Array2<f64>) -> Moments {
        let count = frames.nrows() as f64;
        if frames.nrows() == 0 {
            return Moments {
                count,
                mean: Array1::zeros(frames.ncols()),
                m2: Array1::zeros(frames.ncols()),
            };
        }
        Moments {
            count,
            mean: frames.mean_axis(Axis(0)).unwrap(),
            m2: frames.var_axis(Axis(0), 0.0) * count,
        }
    }

    /// Pairwise merge of two sets of moments.
    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let total = self.count + other.count;
        let delta = &other.mean - &self.mean;
        self.m2 = &self.m2 + &other.m2 + &delta.mapv(|d| d * d) * (self.count * other.count / total);
        self.mean = &self.mean + &delta * (other.count / total);
        self.count = total;
    }
}

/// Contour statistics over recordings `[center - half_window, center + half_window]`,
/// clamped to the list bounds.
pub fn fit_contour_stats_local(
    recordings: &[Array2<f64>],
    center: usize,
    half_window: usize,
) -> Result<NormalizationStats> {
    let moments: Vec<Moments> = recordings.iter().map(Moments::of).collect();
    local_stats(&moments, center, half_window)
}

/// [`fit_contour_stats_local`] for every recording at once.
pub fn fit_contour_stats_all(
    recordings: &[Array2<f64>],
    half_window: usize,
) -> Result<Vec<NormalizationStats>> {
    let moments: Vec<Moments> = recordings.iter().map(Moments::of).collect();
    (0..recordings.len())
        .map(|c| local_stats(&moments, c, half_window))
        .collect()
}

fn local_stats(moments: &[Moments], center: usize, half_window: usize) -> Result<NormalizationStats> {
    if center >= moments.len() {
        return Err(Error::EmptySplit("normalization window outside the recording list"));
    }
    let first = center.saturating_sub(half_window);
    let last = (center + half_window).min(moments.len() - 1);
    let mut acc = moments[first].clone();
    for m in &moments[first + 1..=last] {
        acc.merge(m);
    }
    if acc.count == 0.0 {
        return Err(Error::EmptySplit("no contour frames in normalization window"));
    }
    Ok(NormalizationStats {
        std: floor_std(&acc.m2 / acc.count),
        mean: acc.mean,
        scope: StatsScope::ContourWindow {
            center,
            first,
            last,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_frames_zero_and_two() {
        let f = Array2::from_shape_vec((2, 1), vec![0.0, 2.0]).unwrap();
        let stats = fit_mfcc_stats(f.view()).unwrap();
        let z = normalize_mfcc(&f, &stats).unwrap();
        assert_eq!(z.column(0).to_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_dimension_normalizes_to_zero() {
        let f = Array2::from_shape_fn((5, 2), |(t, d)| if d == 0 { 7.0 } else { t as f64 });
        let stats = fit_mfcc_stats(f.view()).unwrap();
        assert_eq!(stats.std[0], STD_FLOOR);
        let z = stats.normalize(&f).unwrap();
        assert!(z.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardized_data_is_unchanged() {
        let f = Array2::from_shape_vec((4, 1), vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let stats = fit_mfcc_stats(f.view()).unwrap();
        let z = stats.normalize(&f).unwrap();
        for (a, b) in z.iter().zip(f.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_frame_is_rejected() {
        assert!(fit_mfcc_stats(Array2::<f64>::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn normalized_training_set_is_standard() {
        let f = Array2::from_shape_fn((50, 3), |(t, d)| ((t * 7 + d * 13) % 11) as f64 * (d + 1) as f64);
        let stats = fit_mfcc_stats(f.view()).unwrap();
        let z = stats.normalize(&f).unwrap();
        let mean = z.mean_axis(Axis(0)).unwrap();
        let std = z.std_axis(Axis(0), 0.0);
        for d in 0..3 {
            assert!(mean[d].abs() < 1e-9);
            assert!((std[d] - 1.0).abs() < 1e-9);
        }
    }

    fn recording(tag: usize, frames: usize) -> Array2<f64> {
        Array2::from_shape_fn((frames, 2), |(t, d)| ((tag * 31 + t * 7 + d) % 17) as f64)
    }

    #[test]
    fn local_window_is_clamped() {
        let recs: Vec<_> = (0..200).map(|i| recording(i, 3)).collect();
        let stats = fit_contour_stats_local(&recs, 0, 50).unwrap();
        assert_eq!(stats.scope, StatsScope::ContourWindow { center: 0, first: 0, last: 50 });
        let stats = fit_contour_stats_local(&recs, 180, 50).unwrap();
        assert_eq!(stats.scope, StatsScope::ContourWindow { center: 180, first: 130, last: 199 });

        let single = vec![recording(0, 4)];
        let stats = fit_contour_stats_local(&single, 0, 50).unwrap();
        let direct = fit_mfcc_stats(single[0].view()).unwrap();
        assert!((&stats.mean - &direct.mean).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn identical_recordings_normalize_to_zero() {
        let recs = vec![Array2::from_elem((3, 2), 42.0); 5];
        let stats = fit_contour_stats_local(&recs, 2, 50).unwrap();
        assert!(stats.std.iter().all(|&s| s == STD_FLOOR));
        assert!(stats.normalize(&recs[0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn merged_moments_match_brute_force() {
        let recs: Vec<_> = (0..30).map(|i| recording(i, 1 + i % 4)).collect();
        let all = fit_contour_stats_all(&recs, 5).unwrap();
        for (c, stats) in all.iter().enumerate() {
            let first = c.saturating_sub(5);
            let last = (c + 5).min(29);
            let rows: Vec<f64> = recs[first..=last].iter().flat_map(|r| r.iter().cloned()).collect();
            let stacked = Array2::from_shape_vec((rows.len() / 2, 2), rows).unwrap();
            let mean = stacked.mean_axis(Axis(0)).unwrap();
            let std = stacked.std_axis(Axis(0), 0.0);
            for d in 0..2 {
                assert!((stats.mean[d] - mean[d]).abs() < 1e-12);
                assert!((stats.std[d] - std[d]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn denormalize_inverts_normalize(data in proptest::collection::vec(-100.0f64..100.0, 12..60)) {
            let rows = data.len() / 3;
            let f = Array2::from_shape_vec((rows, 3), data[..rows * 3].to_vec()).unwrap();
            let stats = fit_mfcc_stats(f.view()).unwrap();
            prop_assume!(stats.std.iter().all(|&s| s > 1e-3));
            let back = stats.denormalize(&stats.normalize(&f).unwrap()).unwrap();
            for (a, b) in back.iter().zip(f.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
