use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ttest::{paired_t_test, TTest};
use crate::corpus::{Articulator, NormalizationStats, ARTICULATOR_DIM, N_ARTICULATORS, POINTS_PER_ARTICULATOR};
use crate::error::{Error, Result};

/// Denormalized per-frame RMSE in millimetres over the 100 coordinate
/// values (50 X, 50 Y) of one articulator.
pub fn rmse_frame_articulator(
    pred: &[f64],
    truth: &[f64],
    stats: &NormalizationStats,
    pixel_spacing_mm: f64,
) -> Result<f64> {
    for len in [pred.len(), truth.len(), stats.dim()] {
        if len != ARTICULATOR_DIM {
            return Err(Error::ContourLength(len));
        }
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .zip(stats.std.iter())
        .map(|((p, t), s)| {
            // Means cancel; only the scale survives denormalization.
            let d = (p - t) * s * pixel_spacing_mm;
            d * d
        })
        .sum();
    Ok((sum / ARTICULATOR_DIM as f64).sqrt())
}

/// Diagnostic: mean Euclidean distance between corresponding points, in mm.
pub fn mean_point_distance_mm(
    pred: &[f64],
    truth: &[f64],
    stats: &NormalizationStats,
    pixel_spacing_mm: f64,
) -> Result<f64> {
    for len in [pred.len(), truth.len(), stats.dim()] {
        if len != ARTICULATOR_DIM {
            return Err(Error::ContourLength(len));
        }
    }
    let n = POINTS_PER_ARTICULATOR;
    let total: f64 = (0..n)
        .map(|i| {
            let dx = (pred[i] - truth[i]) * stats.std[i];
            let dy = (pred[n + i] - truth[n + i]) * stats.std[n + i];
            dx.hypot(dy) * pixel_spacing_mm
        })
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    pub utterance: String,
    pub frame_index: usize,
    pub articulator: Articulator,
    pub rmse_mm: f64,
    pub eval_included: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub frames: usize,
    pub rmse_mean_mm: f64,
    /// Population standard deviation across frames.
    pub rmse_std_mm: f64,
    pub median_mm: f64,
}

impl ErrorSummary {
    pub fn of(values: &[f64]) -> Option<ErrorSummary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 {
            0.5 * (sorted[mid - 1] + sorted[mid])
        } else {
            sorted[mid]
        };
        Some(ErrorSummary {
            frames: values.len(),
            rmse_mean_mm: mean,
            rmse_std_mm: var.sqrt(),
            median_mm: median,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub approach: String,
    pub model: String,
    /// Canonical articulator order.
    pub per_articulator: Vec<ErrorSummary>,
    /// Averages of the eight per-articulator statistics.
    pub overall: ErrorSummary,
    /// Against a baseline run: eight articulators, then the mean row.
    pub significance: Option<Vec<TTest>>,
    pub phone_accuracy: Option<f64>,
}

/// Per-articulator mean, std and median over evaluated frames, averaged
/// across articulators for the overall row.
pub fn aggregate(errors: &[FrameError], approach: &str, model: &str) -> Result<MetricsReport> {
    let mut by_articulator: Vec<Vec<f64>> = vec![Vec::new(); N_ARTICULATORS];
    for e in errors.iter().filter(|e| e.eval_included) {
        by_articulator[e.articulator.index()].push(e.rmse_mm);
    }
    let per_articulator = Articulator::ALL
        .iter()
        .map(|&a| ErrorSummary::of(&by_articulator[a.index()]).ok_or(Error::EmptyArticulator(a)))
        .collect::<Result<Vec<_>>>()?;
    let k = N_ARTICULATORS as f64;
    let overall = ErrorSummary {
        frames: per_articulator.iter().map(|s| s.frames).sum(),
        rmse_mean_mm: per_articulator.iter().map(|s| s.rmse_mean_mm).sum::<f64>() / k,
        rmse_std_mm: per_articulator.iter().map(|s| s.rmse_std_mm).sum::<f64>() / k,
        median_mm: per_articulator.iter().map(|s| s.median_mm).sum::<f64>() / k,
    };
    Ok(MetricsReport {
        approach: approach.to_string(),
        model: model.to_string(),
        per_articulator,
        overall,
        significance: None,
        phone_accuracy: None,
    })
}

type FrameKey = (String, usize);

fn keyed(errors: &[FrameError]) -> BTreeMap<FrameKey, [Option<f64>; N_ARTICULATORS]> {
    let mut map: BTreeMap<FrameKey, [Option<f64>; N_ARTICULATORS]> = BTreeMap::new();
    for e in errors.iter().filter(|e| e.eval_included) {
        map.entry((e.utterance.clone(), e.frame_index))
            .or_insert([None; N_ARTICULATORS])[e.articulator.index()] = Some(e.rmse_mm);
    }
    map
}

/// Frame-paired t-tests of `run` against `baseline`: one per articulator,
/// then one on the per-frame articulator average.
pub fn compare_runs(run: &[FrameError], baseline: &[FrameError]) -> Result<Vec<TTest>> {
    let a = keyed(run);
    let b = keyed(baseline);
    let mut tests = Vec::with_capacity(N_ARTICULATORS + 1);
    for art in Articulator::ALL {
        let (xs, ys): (Vec<f64>, Vec<f64>) = a
            .iter()
            .filter_map(|(k, va)| Some((va[art.index()]?, b.get(k)?[art.index()]?)))
            .unzip();
        if xs.len() < 2 {
            return Err(Error::EmptyArticulator(art));
        }
        tests.push(paired_t_test(&xs, &ys)?);
    }
    let mean = |v: &[Option<f64>; N_ARTICULATORS]| -> Option<f64> {
        let mut s = 0.0;
        for x in v {
            s += (*x)?;
        }
        Some(s / N_ARTICULATORS as f64)
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(k, va)| Some((mean(va)?, mean(b.get(k)?)?)))
        .unzip();
    tests.push(paired_t_test(&xs, &ys)?);
    Ok(tests)
}

pub const METRICS_HEADER: &str =
    "articulator,approach,model,rmse_mean_mm,rmse_std_mm,median_mm,p_value,significant";

pub fn metrics_to_csv(report: &MetricsReport) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    let rows = Articulator::ALL
        .iter()
        .map(|a| a.slug())
        .chain(std::iter::once("mean"))
        .zip(report.per_articulator.iter().chain(std::iter::once(&report.overall)));
    for (i, (name, s)) in rows.enumerate() {
        let (p, sig) = match &report.significance {
            Some(tests) => (format!("{:e}", tests[i].p), tests[i].significant.to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{name},{},{},{},{},{},{p},{sig}",
            report.approach, report.model, s.rmse_mean_mm, s.rmse_std_mm, s.median_mm
        )
        .unwrap();
    }
    out
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    fs::write(path, metrics_to_csv(report)).map_err(|e| Error::io(path, e))
}

/// Approach and model labels recorded in a metrics CSV.
pub fn read_metrics_labels(path: &Path) -> Result<(String, String)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let row = text
        .lines()
        .nth(1)
        .ok_or_else(|| Error::format("metrics CSV", path, "no rows"))?;
    let cols: Vec<&str> = row.split(',').collect();
    if cols.len() != 8 {
        return Err(Error::format("metrics CSV", path, "expected 8 columns"));
    }
    Ok((cols[1].to_string(), cols[2].to_string()))
}

pub const FRAME_ERRORS_HEADER: &str = "utterance,frame_index,articulator,rmse_mm,eval_included";

pub fn frame_errors_to_csv(errors: &[FrameError]) -> String {
    let mut out = format!("{FRAME_ERRORS_HEADER}\n");
    for e in errors {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.utterance, e.frame_index, e.articulator, e.rmse_mm, e.eval_included
        )
        .unwrap();
    }
    out
}

pub fn write_frame_errors_csv(path: &Path, errors: &[FrameError]) -> Result<()> {
    fs::write(path, frame_errors_to_csv(errors)).map_err(|e| Error::io(path, e))
}

pub fn read_frame_errors_csv(path: &Path) -> Result<Vec<FrameError>> {
    let bad = |m: String| Error::format("frame error CSV", path, m);
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let r = record.map_err(|e| bad(e.to_string()))?;
        if r.len() != 5 {
            return Err(bad(format!("row {}: expected 5 columns", i + 2)));
        }
        let parse_err = |e: &dyn std::fmt::Display| bad(format!("row {}: {e}", i + 2));
        out.push(FrameError {
            utterance: r[0].to_string(),
            frame_index: r[1].parse().map_err(|e| parse_err(&e))?,
            articulator: r[2].parse()?,
            rmse_mm: r[3].parse().map_err(|e| parse_err(&e))?,
            eval_included: r[4].parse().map_err(|e| parse_err(&e))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StatsScope;
    use ndarray::Array1;
    use proptest::prelude::*;

    fn stats(std: f64) -> NormalizationStats {
        NormalizationStats {
            mean: Array1::from_elem(100, 40.0),
            std: Array1::from_elem(100, std),
            scope: StatsScope::GlobalMfcc,
        }
    }

    #[test]
    fn rmse_examples() {
        let s = stats(2.0);
        let truth: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(rmse_frame_articulator(&truth, &truth, &s, 1.62).unwrap(), 0.0);
        // 0.5 normalized units × std 2 = 1 px everywhere.
        let shifted: Vec<f64> = truth.iter().map(|v| v + 0.5).collect();
        let r = rmse_frame_articulator(&shifted, &truth, &s, 1.62).unwrap();
        assert!((r - 1.62).abs() < 1e-12);
        let half: Vec<f64> = truth
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { v + 0.5 } else { *v })
            .collect();
        let r = rmse_frame_articulator(&half, &truth, &s, 1.62).unwrap();
        assert!((r - 1.62 / 2f64.sqrt()).abs() < 1e-12);
        assert!((r - 1.1455).abs() < 1e-4);
        assert!(matches!(
            rmse_frame_articulator(&truth[..99], &truth, &s, 1.62),
            Err(Error::ContourLength(99))
        ));
    }

    #[test]
    fn point_distance_for_diagonal_shift() {
        let s = stats(1.0);
        let truth = vec![0.0; 100];
        let pred = vec![1.0; 100];
        let d = mean_point_distance_mm(&pred, &truth, &s, 1.62).unwrap();
        assert!((d - 1.62 * 2f64.sqrt()).abs() < 1e-12);
    }

    fn frame(utt: &str, f: usize, a: Articulator, v: f64) -> FrameError {
        FrameError {
            utterance: utt.into(),
            frame_index: f,
            articulator: a,
            rmse_mm: v,
            eval_included: true,
        }
    }

    #[test]
    fn aggregate_hand_statistics() {
        let mut errors = Vec::new();
        for a in Articulator::ALL {
            for (f, v) in [1.0, 2.0, 3.0].into_iter().enumerate() {
                errors.push(frame("u", f, a, v));
            }
        }
        errors.push(FrameError { eval_included: false, ..frame("u", 9, Articulator::Tongue, 100.0) });
        let r = aggregate(&errors, "AAT", "ST-5").unwrap();
        let s = r.per_articulator[Articulator::Tongue.index()];
        assert_eq!(s.frames, 3);
        assert!((s.rmse_mean_mm - 2.0).abs() < 1e-15);
        assert_eq!(s.median_mm, 2.0);
        assert!((s.rmse_std_mm - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn aggregate_overall_is_mean_of_articulators() {
        let errors: Vec<_> = Articulator::ALL.iter().map(|&a| frame("u", 0, a, 1.65)).collect();
        let r = aggregate(&errors, "ABA", "ST-5").unwrap();
        assert!((r.overall.rmse_mean_mm - 1.65).abs() < 1e-12);
        let missing: Vec<_> = errors.iter().filter(|e| e.articulator != Articulator::Epiglottis).cloned().collect();
        assert!(matches!(
            aggregate(&missing, "ABA", "ST-5"),
            Err(Error::EmptyArticulator(Articulator::Epiglottis))
        ));
    }

    #[test]
    fn identical_runs_are_not_significant() {
        let mut errors = Vec::new();
        for a in Articulator::ALL {
            for f in 0..5 {
                errors.push(frame("u", f, a, 1.0 + f as f64 * 0.1 + a.index() as f64));
            }
        }
        let tests = compare_runs(&errors, &errors).unwrap();
        assert_eq!(tests.len(), 9);
        assert!(tests.iter().all(|t| t.p == 1.0 && !t.significant));
    }

    #[test]
    fn frame_error_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let errors = vec![frame("a_0", 3, Articulator::UpperLip, 1.2345678901234), FrameError {
            eval_included: false,
            ..frame("a_1", 0, Articulator::Tongue, 0.1)
        }];
        write_frame_errors_csv(&path, &errors).unwrap();
        assert_eq!(read_frame_errors_csv(&path).unwrap(), errors);
    }

    proptest! {
        #[test]
        fn aggregate_is_permutation_invariant(values in proptest::collection::vec(0.0f64..5.0, 8..40), seed in any::<u64>()) {
            let errors: Vec<_> = values.iter().enumerate()
                .map(|(i, &v)| frame("u", i / 8, Articulator::ALL[i % 8], v)).collect();
            let mut shuffled = errors.clone();
            use rand::{SeedableRng, seq::SliceRandom};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate(&errors, "x", "y").unwrap();
            let b = aggregate(&shuffled, "x", "y").unwrap();
            for (sa, sb) in a.per_articulator.iter().zip(&b.per_articulator) {
                prop_assert!((sa.rmse_mean_mm - sb.rmse_mean_mm).abs() < 1e-12);
                prop_assert!((sa.rmse_std_mm - sb.rmse_std_mm).abs() < 1e-12);
                prop_assert_eq!(sa.median_mm, sb.median_mm);
            }
        }

        #[test]
        fn rmse_invariant_under_point_relabeling(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng, seq::SliceRandom};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = NormalizationStats {
                mean: Array1::zeros(100),
                std: Array1::from_elem(100, 1.7),
                scope: StatsScope::GlobalMfcc,
            };
            let pred: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
            let truth: Vec<f64> = (0..100).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut perm: Vec<usize> = (0..100).collect();
            perm.shuffle(&mut rng);
            let p2: Vec<f64> = perm.iter().map(|&i| pred[i]).collect();
            let t2: Vec<f64> = perm.iter().map(|&i| truth[i]).collect();
            let a = rmse_frame_articulator(&pred, &truth, &s, 1.62).unwrap();
            let b = rmse_frame_articulator(&p2, &t2, &s, 1.62).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
