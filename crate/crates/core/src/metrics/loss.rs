use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Probabilities are clamped to this before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct RegressionBatch<'a> {
    pub truth: ArrayView2<'a, f64>,
    pub pred: ArrayView2<'a, f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassificationBatch<'a> {
    /// One-hot rows.
    pub labels: ArrayView2<'a, f64>,
    /// Probability rows.
    pub probs: ArrayView2<'a, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Gradient w.r.t. the predictions (MSE) or the logits (cross-entropy).
    pub grad: Array2<f64>,
}

/// `(1/n)·Σ(y − ŷ)²` over every scalar, with gradient `(2/n)(ŷ − y)`.
pub fn mse_loss(batch: RegressionBatch<'_>) -> Result<LossValue> {
    if batch.truth.dim() != batch.pred.dim() {
        return Err(Error::Dimension {
            context: "regression batch",
            expected: batch.truth.len(),
            got: batch.pred.len(),
        });
    }
    let n = batch.truth.len();
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let diff = &batch.pred - &batch.truth;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n as f64;
    Ok(LossValue {
        value,
        grad: diff * (2.0 / n as f64),
    })
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// One-hot matrix for a label sequence.
pub fn one_hot_rows(labels: &[usize], classes: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((labels.len(), classes));
    for (t, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(Error::UnknownPhone(format!("index {c}")));
        }
        m[[t, c]] = 1.0;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    /// `−Σ_i Σ_c y_ic log ŷ_ic`, summed over examples.
    pub total: f64,
    pub per_frame: Array1<f64>,
    /// Gradient of `total` w.r.t. the logits that produced `probs`: `ŷ − y`.
    pub grad_logits: Array2<f64>,
}

pub fn cross_entropy_loss(batch: ClassificationBatch<'_>) -> Result<CrossEntropy> {
    if batch.labels.dim() != batch.probs.dim() {
        return Err(Error::Dimension {
            context: "classification batch",
            expected: batch.labels.len(),
            got: batch.probs.len(),
        });
    }
    if batch.labels.nrows() == 0 {
        return Err(Error::EmptyBatch);
    }
    for (i, row) in batch.labels.rows().into_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::InvalidLabels(i));
        }
    }
    for (i, row) in batch.probs.rows().into_iter().enumerate() {
        if (row.sum() - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
            return Err(Error::Config(format!("probability row {i} is not a distribution")));
        }
    }
    let per_frame: Array1<f64> = batch
        .labels
        .rows()
        .into_iter()
        .zip(batch.probs.rows())
        .map(|(y, p)| {
            -y.iter()
                .zip(p.iter())
                .map(|(&y, &p)| y * p.max(PROB_FLOOR).ln())
                .sum::<f64>()
        })
        .collect();
    Ok(CrossEntropy {
        total: per_frame.sum(),
        per_frame,
        grad_logits: &batch.probs - &batch.labels,
    })
}

/// `MSE + CE / frames`, with both gradients scaled the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss {
    pub value: f64,
    pub mse: f64,
    /// Cross-entropy divided by the frame count.
    pub cross_entropy: f64,
    pub grad_pred: Array2<f64>,
    pub grad_logits: Array2<f64>,
}

pub fn combined_loss(
    reg: RegressionBatch<'_>,
    cls: ClassificationBatch<'_>,
) -> Result<CombinedLoss> {
    if reg.truth.nrows() != cls.labels.nrows() {
        return Err(Error::BatchMismatch {
            regression: reg.truth.nrows(),
            classification: cls.labels.nrows(),
        });
    }
    let mse = mse_loss(reg)?;
    let ce = cross_entropy_loss(cls)?;
    let frames = cls.labels.nrows() as f64;
    Ok(CombinedLoss {
        value: mse.value + ce.total / frames,
        mse: mse.value,
        cross_entropy: ce.total / frames,
        grad_pred: mse.grad,
        grad_logits: ce.grad_logits / frames,
    })
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(probs: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = probs
        .axis_iter(Axis(0))
        .zip(labels)
        .filter(|(row, &label)| argmax(row.iter().copied()) == label)
        .count();
    hits as f64 / labels.len() as f64
}

pub fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
        .0
}
