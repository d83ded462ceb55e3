use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use super::trainer::target_columns;
use crate::corpus::{Articulator, ContourSet, Sequence, ARTICULATOR_DIM, CONTOUR_DIM};
use crate::error::{Error, Result};
use crate::metrics::{argmax, rmse_frame_articulator, FrameError};
use crate::models::{Model, TaskMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub frame_errors: Vec<FrameError>,
    /// Frame-level accuracy over evaluated frames, when a model has a phone head.
    pub phone_accuracy: Option<f64>,
}

/// Per-frame, per-articulator errors of normalized predictions whose
/// column `j` holds coordinate `cols.start + j` of the full contour vector.
pub fn frame_errors_for(
    seq: &Sequence,
    pred: ArrayView2<'_, f64>,
    mode: TaskMode,
    pixel_spacing_mm: f64,
) -> Result<Vec<FrameError>> {
    let cols = target_columns(mode);
    if pred.dim() != (seq.len(), cols.len()) {
        return Err(Error::Dimension {
            context: "prediction columns",
            expected: cols.len(),
            got: pred.ncols(),
        });
    }
    let articulators: Vec<Articulator> = match mode {
        TaskMode::Aat => Articulator::ALL.to_vec(),
        TaskMode::Aba(a) => vec![a],
    };
    let mut out = Vec::with_capacity(seq.len() * articulators.len());
    for t in 0..seq.len() {
        for (k, &a) in articulators.iter().enumerate() {
            let local = k * ARTICULATOR_DIM..(k + 1) * ARTICULATOR_DIM;
            let global = a.range();
            let p = pred.row(t).slice(ndarray::s![local]).to_vec();
            let y = seq.targets.row(t).slice(ndarray::s![global.clone()]).to_vec();
            let stats = seq.contour_stats.slice(global);
            out.push(FrameError {
                utterance: seq.id.clone(),
                frame_index: seq.frame_index[t],
                articulator: a,
                rmse_mm: rmse_frame_articulator(&p, &y, &stats, pixel_spacing_mm)?,
                eval_included: seq.eval_mask[t],
            });
        }
    }
    Ok(out)
}

/// Runs every model over the test sequences and merges their frame errors
/// in (utterance, frame, articulator) order.
pub fn evaluate_models(models: &[Model], test: &[Sequence], pixel_spacing_mm: f64) -> Result<Evaluation> {
    let per_seq = test
        .par_iter()
        .map(|seq| {
            let mut errors = Vec::new();
            let mut hits = (0usize, 0usize, false);
            for model in models {
                let out = model.predict(seq.inputs.view())?;
                errors.extend(frame_errors_for(seq, out.contours.view(), model.spec().task_mode, pixel_spacing_mm)?);
                if let Some(probs) = &out.phone_probs {
                    hits.2 = true;
                    for (t, row) in probs.rows().into_iter().enumerate() {
                        if seq.eval_mask[t] {
                            hits.1 += 1;
                            hits.0 += usize::from(argmax(row.iter().copied()) == seq.labels[t]);
                        }
                    }
                }
            }
            errors.sort_by_key(|e| (e.frame_index, e.articulator));
            Ok((errors, hits))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frame_errors = Vec::new();
    let (mut correct, mut total, mut has_head) = (0, 0, false);
    for (errors, (c, n, h)) in per_seq {
        frame_errors.extend(errors);
        correct += c;
        total += n;
        has_head |= h;
    }
    Ok(Evaluation {
        frame_errors,
        phone_accuracy: (has_head && total > 0).then(|| correct as f64 / total as f64),
    })
}

/// Training-set mean contour in pixels over all kept frames.
pub fn mean_contour_px(train: &[Sequence]) -> Result<Array1<f64>> {
    let mut sum = Array1::<f64>::zeros(CONTOUR_DIM);
    let mut n = 0usize;
    for seq in train {
        let px = seq.contour_stats.denormalize(&seq.targets)?;
        sum += &px.sum_axis(ndarray::Axis(0));
        n += px.nrows();
    }
    if n == 0 {
        return Err(Error::EmptySplit("train"));
    }
    Ok(sum / n as f64)
}

/// Frame errors of a predictor that outputs `contour_px` for every frame.
pub fn evaluate_constant(contour_px: &Array1<f64>, test: &[Sequence], pixel_spacing_mm: f64) -> Result<Vec<FrameError>> {
    let mut out = Vec::new();
    for seq in test {
        let row = contour_px.view().insert_axis(ndarray::Axis(0));
        let px: Array2<f64> = row.broadcast((seq.len(), CONTOUR_DIM)).unwrap().to_owned();
        let pred = seq.contour_stats.normalize(&px)?;
        out.extend(frame_errors_for(seq, pred.view(), TaskMode::Aat, pixel_spacing_mm)?);
    }
    Ok(out)
}

/// Pixel-space contours predicted for every kept frame of `seq`, merging
/// the outputs of per-articulator models. Fails unless the models cover
/// all 800 coordinates.
pub fn predict_contours_px(models: &[Model], seq: &Sequence) -> Result<Vec<ContourSet>> {
    let mut norm = Array2::<f64>::zeros((seq.len(), CONTOUR_DIM));
    let mut covered = vec![false; CONTOUR_DIM];
    for model in models {
        let cols = target_columns(model.spec().task_mode);
        let out = model.predict(seq.inputs.view())?;
        norm.slice_mut(ndarray::s![.., cols.clone()]).assign(&out.contours);
        covered[cols].iter_mut().for_each(|c| *c = true);
    }
    let n_covered = covered.iter().filter(|&&c| c).count();
    if n_covered != CONTOUR_DIM {
        return Err(Error::Dimension {
            context: "predicted contour coverage",
            expected: CONTOUR_DIM,
            got: n_covered,
        });
    }
    let px = seq.contour_stats.denormalize(&norm)?;
    to_contour_sets(&px, &seq.frame_index)
}

/// Ground-truth pixel contours of `seq` at its kept frame indices.
pub fn truth_contours_px(seq: &Sequence) -> Result<Vec<ContourSet>> {
    let px = seq.contour_stats.denormalize(&seq.targets)?;
    to_contour_sets(&px, &seq.frame_index)
}

fn to_contour_sets(px: &Array2<f64>, frame_index: &[usize]) -> Result<Vec<ContourSet>> {
    px.rows()
        .into_iter()
        .zip(frame_index)
        .map(|(row, &i)| ContourSet::from_values(i, row.to_vec()))
        .collect()
}
