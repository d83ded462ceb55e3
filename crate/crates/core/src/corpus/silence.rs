use super::schema::{PhoneInterval, PhoneInventory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SilenceMode {
    Train,
    Eval,
}

/// Frames that survive the silence policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSelection {
    /// Indices into the aligned frame sequence, ascending.
    pub kept: Vec<usize>,
    /// Per kept frame: `true` when the frame counts towards evaluation.
    pub eval_mask: Vec<bool>,
}

impl FrameSelection {
    pub fn evaluated(&self) -> impl Iterator<Item = usize> + '_ {
        self.kept
            .iter()
            .zip(&self.eval_mask)
            .filter_map(|(&i, &m)| m.then_some(i))
    }

    pub fn n_evaluated(&self) -> usize {
        self.eval_mask.iter().filter(|&&m| m).count()
    }
}

/// Center of aligned frame `index` on a `hop_ms` grid.
pub fn aligned_frame_center_ms(index: usize, hop_ms: f64) -> f64 {
    (index as f64 + 0.5) * hop_ms
}

/// Drops inter-sentence silence and masks sentence-internal pauses.
///
/// In `Train` mode every non-dropped frame is returned, with pauses marked
/// as excluded in `eval_mask`. In `Eval` mode only evaluated frames are
/// returned.
pub fn apply_silence_policy(
    n_frames: usize,
    hop_ms: f64,
    intervals: &[PhoneInterval],
    inventory: &PhoneInventory,
    mode: SilenceMode,
) -> Result<FrameSelection> {
    let silence = inventory.silence_index();
    let mut kept = Vec::with_capacity(n_frames);
    let mut eval_mask = Vec::with_capacity(n_frames);
    let mut cursor = 0;
    for frame in 0..n_frames {
        let t = aligned_frame_center_ms(frame, hop_ms);
        // Intervals are ordered, so the covering one never moves backwards.
        while cursor < intervals.len() && intervals[cursor].end_ms <= t {
            cursor += 1;
        }
        let iv = intervals
            .get(cursor)
            .filter(|iv| iv.contains(t))
            .ok_or(Error::SegmentationGap { time_ms: t })?;
        let (keep, evaluate) = if iv.symbol != silence {
            (true, true)
        } else if iv.sentence_internal {
            (mode == SilenceMode::Train, false)
        } else {
            (false, false)
        };
        if keep {
            kept.push(frame);
            eval_mask.push(evaluate);
        }
    }
    Ok(FrameSelection { kept, eval_mask })
}

/// Phone index covering each aligned frame.
pub fn frame_labels(n_frames: usize, hop_ms: f64, intervals: &[PhoneInterval]) -> Result<Vec<usize>> {
    (0..n_frames)
        .map(|frame| {
            let t = aligned_frame_center_ms(frame, hop_ms);
            intervals
                .iter()
                .find(|iv| iv.contains(t))
                .map(|iv| iv.symbol)
                .ok_or(Error::SegmentationGap { time_ms: t })
        })
        .collect()
}
