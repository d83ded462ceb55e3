use serde::{Deserialize, Serialize};

/// Validation loss must fall by more than this to count as improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Keep training; `improved` marks a new best epoch.
    Continue { improved: bool },
    Stop { improved: bool, reason: StopReason },
}

impl Decision {
    pub fn improved(self) -> bool {
        match self {
            Decision::Continue { improved } | Decision::Stop { improved, .. } => improved,
        }
    }
}

/// Patience rule over 1-based epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub max_epochs: usize,
    pub min_delta: f64,
    best: Option<(usize, f64)>,
}

impl EarlyStopping {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        EarlyStopping {
            patience,
            max_epochs,
            min_delta: MIN_IMPROVEMENT,
            best: None,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|b| b.0)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|b| b.1)
    }

    pub fn observe(&mut self, epoch: usize, valid_loss: f64) -> Decision {
        let improved = match self.best {
            None => valid_loss.is_finite(),
            Some((_, best)) => valid_loss < best - self.min_delta,
        };
        if improved {
            self.best = Some((epoch, valid_loss));
        }
        let since = epoch - self.best.map_or(0, |b| b.0);
        if since >= self.patience {
            Decision::Stop {
                improved,
                reason: StopReason::EarlyStopping,
            }
        } else if epoch >= self.max_epochs {
            Decision::Stop {
                improved,
                reason: StopReason::MaxEpochs,
            }
        } else {
            Decision::Continue { improved }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(losses: &[f64], patience: usize, max_epochs: usize) -> (usize, Option<usize>, StopReason) {
        let mut es = EarlyStopping::new(patience, max_epochs);
        for (i, &l) in losses.iter().enumerate() {
            if let Decision::Stop { reason, .. } = es.observe(i + 1, l) {
                return (i + 1, es.best_epoch(), reason);
            }
        }
        panic!("sequence exhausted without stopping");
    }

    #[test]
    fn plateau_after_second_epoch() {
        let losses = [5.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0];
        assert_eq!(run(&losses, 10, 500), (12, Some(2), StopReason::EarlyStopping));
    }

    #[test]
    fn strictly_decreasing_runs_to_max() {
        let losses: Vec<f64> = (0..500).map(|i| 10.0 - i as f64 * 0.01).collect();
        assert_eq!(run(&losses, 10, 500), (500, Some(500), StopReason::MaxEpochs));
    }

    #[test]
    fn sub_delta_gains_do_not_count() {
        let mut losses = vec![1.0];
        losses.extend((0..19).map(|i| 1.0 - (i % 3) as f64 * 4e-7));
        assert_eq!(run(&losses, 10, 500), (11, Some(1), StopReason::EarlyStopping));
    }
}
