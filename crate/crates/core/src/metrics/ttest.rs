use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    pub significant: bool,
}

/// Two-sided p-value of Student's t with `df` degrees of freedom, through
/// the regularized incomplete beta function.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Paired two-sided t-test on `a − b` using the sample standard deviation.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "paired t-test",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::EmptyBatch);
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let df = n - 1.0;
    let t = if mean == 0.0 {
        0.0
    } else if var == 0.0 {
        mean.signum() * f64::INFINITY
    } else {
        mean / (var / n).sqrt()
    };
    let p = student_t_two_sided_p(t, df);
    Ok(TTest {
        t,
        p,
        df,
        significant: p < SIGNIFICANCE_LEVEL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.5, 3.0];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p, r.significant), (0.0, 1.0, false));
    }

    #[test]
    fn textbook_differences() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = paired_t_test(&a, &b).unwrap();
        // sd = sqrt(2.5), t = 3 / (sd / sqrt 5)
        assert!((r.t - 3.0 / (2.5f64.sqrt() / 5f64.sqrt())).abs() < 1e-12);
        assert!((r.t - 4.2426).abs() < 1e-4);
        assert!((r.p - 0.0132).abs() < 1e-3);
        assert!(r.significant);
    }

    #[test]
    fn alternating_differences() {
        let r = paired_t_test(&[1.0, -1.0, 1.0, -1.0], &[0.0; 4]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn antisymmetric() {
        let a = [1.3, 2.2, 0.4, 5.0, 3.3];
        let b = [1.0, 2.9, 0.1, 4.1, 2.0];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn p_value_reference_points() {
        // t = 2.776 is the 97.5% quantile for 4 df; t = 1.96 tends to it for large df.
        assert!((student_t_two_sided_p(2.7764451, 4.0) - 0.05).abs() < 1e-6);
        assert!((student_t_two_sided_p(1.959964, 1e7) - 0.05).abs() < 1e-5);
        assert_eq!(student_t_two_sided_p(0.0, 3.0), 1.0);
        // df = 1 is Cauchy: p = 1 − 2·atan(t)/π.
        for t in [0.5, 1.0, 3.0] {
            let cauchy = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided_p(t, 1.0) - cauchy).abs() < 1e-9);
        }
    }

    #[test]
    fn length_checks() {
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }
}
