//! Metrics, synthetic ground truth and the mean-only ablation.

pub mod datasets;
pub mod hdfs_like;
mod metrics;
pub mod synthetic;

pub use metrics::{evaluate, Degenerate, MetricsReport};
pub use synthetic::{generate_synthetic, SyntheticDataset, SyntheticSpec};

use crate::detector::{detect_batch, Verdict};
use crate::error::Result;
use crate::pattern::ModelBundle;
use crate::pipeline::{train, TrainOptions};
use crate::scalar::Scalar;
use crate::sequencer::EventCountMatrix;

/// Scores verdicts against the labels stored in the matrix they came from.
pub fn evaluate_against<T: Scalar>(verdicts: &[Verdict<T>], x: &EventCountMatrix) -> Result<MetricsReport> {
    let predicted: Vec<(&str, bool)> = verdicts.iter().map(|v| (v.sequence_id.as_str(), v.is_anomaly)).collect();
    let truth: Vec<_> = x.sequence_ids().iter().map(String::as_str).zip(x.labels().iter().copied()).collect();
    evaluate(&predicted, &truth)
}

/// Train, detect and score in one go.
pub fn run_pipeline<T: Scalar>(
    train_x: &EventCountMatrix,
    val_x: &EventCountMatrix,
    test_x: &EventCountMatrix,
    opts: &TrainOptions,
) -> Result<(ModelBundle<T>, Vec<Verdict<T>>, MetricsReport)> {
    let (bundle, _) = train::<T>(train_x, val_x, opts)?;
    let verdicts = detect_batch(test_x, &bundle, opts.parallel)?;
    let report = evaluate_against(&verdicts, test_x)?;
    Ok((bundle, verdicts, report))
}

/// The same pipeline with every event forced to a mean model.
pub fn mean_only_baseline<T: Scalar>(
    train_x: &EventCountMatrix,
    val_x: &EventCountMatrix,
    test_x: &EventCountMatrix,
    opts: &TrainOptions,
) -> Result<(Vec<Verdict<T>>, MetricsReport)> {
    let opts = TrainOptions {
        force_independent: true,
        ..opts.clone()
    };
    let (_, verdicts, report) = run_pipeline(train_x, val_x, test_x, &opts)?;
    Ok((verdicts, report))
}
