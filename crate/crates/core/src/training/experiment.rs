use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Approach, TrainConfig};
use super::evaluate::{evaluate_models, Evaluation};
use super::trainer::{train, TrainLog};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, write_frame_errors_csv, write_metrics_csv, ErrorSummary, FrameError, MetricsReport};
use crate::models::{Model, ModelSpec, TaskMode};

pub const FRAME_ERRORS_FILE: &str = "frame_errors.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// File stem for a trained network: `aat` or `aba-<articulator>`.
pub fn run_name(mode: TaskMode) -> String {
    match mode {
        TaskMode::Aat => "aat".to_string(),
        TaskMode::Aba(a) => format!("aba-{}", a.slug()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub spec: ModelSpec,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub epochs_run: usize,
}

/// Machine-readable digest of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub approach: Approach,
    pub model: String,
    pub config: TrainConfig,
    pub models: Vec<ModelSummary>,
    /// Per trained articulator, canonical order.
    pub per_articulator: Vec<(String, ErrorSummary)>,
    pub phone_accuracy: Option<f64>,
    pub test_utterances: usize,
}

pub struct ExperimentOutput {
    pub models: Vec<Model>,
    pub logs: Vec<TrainLog>,
    pub evaluation: Evaluation,
    /// Present when every articulator was evaluated.
    pub report: Option<MetricsReport>,
    pub summary: ExperimentSummary,
    pub checkpoints: Vec<PathBuf>,
}

/// Derives an independent seed per trained network.
fn task_seed(base: u64, index: usize, salt: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64 + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9))
        ^ salt
}

/// Trains every network of the experiment, then (and only then) opens the
/// test split for evaluation. With an output directory, writes checkpoints,
/// training logs, frame errors, metrics and a summary there.
pub fn run_experiment(dataset: &Dataset, config: &TrainConfig, out_dir: Option<&Path>) -> Result<ExperimentOutput> {
    config.validate()?;
    let specs = config.model_specs();
    for spec in &specs {
        if spec.input_dim != dataset.input_dim {
            return Err(Error::BadSpec(format!(
                "{} expects {}-dim inputs but the dataset provides {}",
                spec.variant, spec.input_dim, dataset.input_dim
            )));
        }
    }
    let trained = specs
        .par_iter()
        .enumerate()
        .map(|(i, &spec)| {
            let model = Model::build(spec, task_seed(config.seed, i, 0x6d6f64656c))?;
            log::info!("training {} {}", spec.variant, run_name(spec.task_mode));
            train(model, &dataset.train, &dataset.valid, config, task_seed(config.seed, i, 0x6f72646572))
        })
        .collect::<Result<Vec<_>>>()?;
    let (models, logs): (Vec<Model>, Vec<TrainLog>) = trained.into_iter().unzip();

    let test = dataset.test.open();
    let evaluation = evaluate_models(&models, test, dataset.pixel_spacing_mm)?;

    let approach = config.approach;
    let model_name = config.variant.name().to_string();
    let report = if models.len() == 8 || approach == Approach::Aat {
        let mut r = aggregate(&evaluation.frame_errors, approach.name(), &model_name)?;
        r.phone_accuracy = evaluation.phone_accuracy;
        Some(r)
    } else {
        None
    };
    let per_articulator = per_articulator_summaries(&evaluation.frame_errors);
    let summary = ExperimentSummary {
        approach,
        model: model_name,
        config: config.clone(),
        models: models
            .iter()
            .zip(&logs)
            .map(|(m, l)| ModelSummary {
                name: run_name(m.spec().task_mode),
                spec: *m.spec(),
                best_epoch: l.best_epoch,
                best_valid_loss: l.best_valid_loss,
                epochs_run: l.epochs.len(),
            })
            .collect(),
        per_articulator,
        phone_accuracy: evaluation.phone_accuracy,
        test_utterances: test.len(),
    };

    let mut checkpoints = Vec::new();
    if let Some(dir) = out_dir {
        let ckpt_dir = dir.join(CHECKPOINT_DIR);
        fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
        for (m, l) in models.iter().zip(&logs) {
            let name = run_name(m.spec().task_mode);
            let path = ckpt_dir.join(format!("{name}.vtm"));
            m.save(&path)?;
            checkpoints.push(path);
            l.write_csv(&dir.join(format!("train_log_{name}.csv")))?;
        }
        write_frame_errors_csv(&dir.join(FRAME_ERRORS_FILE), &evaluation.frame_errors)?;
        if let Some(r) = &report {
            write_metrics_csv(&dir.join(METRICS_FILE), r)?;
        }
        write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    }
    Ok(ExperimentOutput {
        models,
        logs,
        evaluation,
        report,
        summary,
        checkpoints,
    })
}

pub fn write_summary(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Statistics for each articulator present among the evaluated frames.
pub fn per_articulator_summaries(errors: &[FrameError]) -> Vec<(String, ErrorSummary)> {
    crate::corpus::Articulator::ALL
        .iter()
        .filter_map(|&a| {
            let values: Vec<f64> = errors
                .iter()
                .filter(|e| e.eval_included && e.articulator == a)
                .map(|e| e.rmse_mm)
                .collect();
            ErrorSummary::of(&values).map(|s| (a.slug().to_string(), s))
        })
        .collect()
}

/// Loads every checkpoint in a run directory, in file-name order.
pub fn load_checkpoints(run_dir: &Path) -> Result<Vec<Model>> {
    let dir = run_dir.join(CHECKPOINT_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vtm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::format("run directory", &dir, "no checkpoints found"));
    }
    paths.iter().map(|p| Model::load(p)).collect()
}
