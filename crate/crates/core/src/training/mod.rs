//! Adam, early stopping, the epoch loop and the ABA/AAT experiment driver.

mod adam;
mod config;
mod early_stopping;
mod evaluate;
mod experiment;
mod trainer;

pub use adam::{adam_step, AdamState, ADAM_EPSILON, BETA1, BETA2};
pub use config::{Approach, ExperimentConfig, Precision, TrainConfig};
pub use early_stopping::{Decision, EarlyStopping, StopReason, MIN_IMPROVEMENT};
pub use evaluate::{
    evaluate_constant, evaluate_models, frame_errors_for, mean_contour_px, predict_contours_px, truth_contours_px, Evaluation,
};
pub use experiment::{
    load_checkpoints, per_articulator_summaries, run_experiment, run_name, write_summary, ExperimentOutput,
    ExperimentSummary, ModelSummary, CHECKPOINT_DIR, FRAME_ERRORS_FILE, METRICS_FILE, SUMMARY_FILE,
};
pub use trainer::{mean_loss, run_epochs, target_columns, train, EpochRecord, EpochRunner, SequenceTrainer, TrainLog};
