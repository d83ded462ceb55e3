use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::{s, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::early_stopping::{Decision, EarlyStopping, StopReason};
use crate::corpus::{Sequence, ARTICULATOR_DIM, CONTOUR_DIM};
use crate::error::{Error, Result};
use crate::models::{Model, TaskMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    /// New best validation loss at this epoch.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub stop_reason: StopReason,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_loss,best\n");
        for r in &self.epochs {
            writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.valid_loss, r.best).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// One epoch of work and its validation score. Separated from the loop so
/// the stopping logic can be driven by scripted losses.
pub trait EpochRunner {
    fn train_epoch(&mut self, epoch: usize) -> Result<f64>;
    fn validation_loss(&mut self) -> Result<f64>;
    /// Called whenever the latest epoch is the best so far.
    fn keep_best(&mut self);
}

pub fn run_epochs<R: EpochRunner>(runner: &mut R, patience: usize, max_epochs: usize) -> Result<TrainLog> {
    let mut rule = EarlyStopping::new(patience, max_epochs);
    let mut epochs = Vec::new();
    for epoch in 1..=max_epochs {
        let train_loss = runner.train_epoch(epoch)?;
        let valid_loss = runner.validation_loss()?;
        let decision = rule.observe(epoch, valid_loss);
        if decision.improved() {
            runner.keep_best();
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} valid {valid_loss:.6}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            best: decision.improved(),
        });
        if let Decision::Stop { reason, .. } = decision {
            return Ok(TrainLog {
                epochs,
                best_epoch: rule.best_epoch().unwrap_or(0),
                best_valid_loss: rule.best_loss().unwrap_or(f64::NAN),
                stop_reason: reason,
            });
        }
    }
    unreachable!("the stopping rule ends every run by max_epochs")
}

/// Output columns of the 800-dim contour vector a task predicts.
pub fn target_columns(mode: TaskMode) -> Range<usize> {
    match mode {
        TaskMode::Aat => 0..CONTOUR_DIM,
        TaskMode::Aba(a) => {
            let start = a.index() * ARTICULATOR_DIM;
            start..start + ARTICULATOR_DIM
        }
    }
}

fn targets_of<'a>(seq: &'a Sequence, cols: &Range<usize>) -> ArrayView2<'a, f64> {
    seq.targets.slice(s![.., cols.clone()])
}

/// Mean per-utterance loss of `model` over `sequences`.
pub fn mean_loss(model: &Model, sequences: &[Sequence]) -> Result<f64> {
    let cols = target_columns(model.spec().task_mode);
    let losses = sequences
        .par_iter()
        .map(|seq| Ok(model.evaluate_loss(seq.inputs.view(), targets_of(seq, &cols), &seq.labels)?.total))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / sequences.len() as f64)
}

/// Mini-batch Adam over shuffled utterances.
pub struct SequenceTrainer<'a> {
    pub model: Model,
    best: Vec<f64>,
    adam: AdamState,
    train: &'a [Sequence],
    valid: &'a [Sequence],
    cols: Range<usize>,
    batch_size: usize,
    learning_rate: f64,
    rng: ChaCha8Rng,
}

impl<'a> SequenceTrainer<'a> {
    pub fn new(model: Model, train: &'a [Sequence], valid: &'a [Sequence], config: &TrainConfig, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptySplit("train"));
        }
        if valid.is_empty() {
            return Err(Error::EmptySplit("valid"));
        }
        let input_dim = train[0].inputs.ncols();
        if input_dim != model.spec().input_dim {
            return Err(Error::Dimension {
                context: "training inputs",
                expected: model.spec().input_dim,
                got: input_dim,
            });
        }
        Ok(SequenceTrainer {
            best: model.store().values().to_vec(),
            adam: AdamState::new(model.parameter_count()),
            cols: target_columns(model.spec().task_mode),
            model,
            train,
            valid,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Restores the best-epoch parameters and returns the model.
    pub fn into_best(mut self) -> Model {
        self.model.store_mut().values_mut().copy_from_slice(&self.best);
        self.model
    }
}

impl EpochRunner for SequenceTrainer<'_> {
    fn train_epoch(&mut self, _epoch: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for batch in order.chunks(self.batch_size) {
            let model = &self.model;
            let cols = &self.cols;
            let results = batch
                .par_iter()
                .map(|&i| {
                    let seq = &self.train[i];
                    model.loss_and_gradient_on(seq.inputs.view(), targets_of(seq, cols), &seq.labels)
                })
                .collect::<Result<Vec<_>>>()?;
            // Reduce in batch order so the sum is independent of scheduling.
            let mut results = results.into_iter();
            let (first_loss, mut grad) = results.next().expect("chunks are non-empty");
            total += first_loss.total;
            for (loss, g) in results {
                total += loss.total;
                grad.add_scaled(&g, 1.0);
            }
            grad.scale(1.0 / batch.len() as f64);
            let params = self.model.store_mut().values_mut();
            adam_step(params, &grad, &mut self.adam, self.learning_rate)?;
        }
        Ok(total / self.train.len() as f64)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        let loss = mean_loss(&self.model, self.valid)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step: self.adam.step });
        }
        Ok(loss)
    }

    fn keep_best(&mut self) {
        self.best.copy_from_slice(self.model.store().values());
    }
}

/// Trains `model` with early stopping and returns it at its best
/// validation epoch.
pub fn train(model: Model, train: &[Sequence], valid: &[Sequence], config: &TrainConfig, seed: u64) -> Result<(Model, TrainLog)> {
    config.validate()?;
    let mut trainer = SequenceTrainer::new(model, train, valid, config, seed)?;
    let log = run_epochs(&mut trainer, config.patience, config.max_epochs)?;
    Ok((trainer.into_best(), log))
}
