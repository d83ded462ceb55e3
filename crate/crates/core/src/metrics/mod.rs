//! Training objectives, millimetre-space evaluation and significance tests.

mod eval;
mod loss;
mod ttest;

pub use eval::{
    aggregate, compare_runs, frame_errors_to_csv, mean_point_distance_mm, metrics_to_csv,
    read_frame_errors_csv, read_metrics_labels, rmse_frame_articulator, write_frame_errors_csv,
    write_metrics_csv, ErrorSummary, FrameError, MetricsReport, FRAME_ERRORS_HEADER,
    METRICS_HEADER,
};
pub use loss::{
    accuracy, argmax, combined_loss, cross_entropy_loss, mse_loss, one_hot_rows, softmax,
    ClassificationBatch, CombinedLoss, CrossEntropy, LossValue, RegressionBatch, PROB_FLOOR,
};
pub use ttest::{paired_t_test, student_t_two_sided_p, TTest, SIGNIFICANCE_LEVEL};
