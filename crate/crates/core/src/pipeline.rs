//! Training phase: blanket discovery, per-event models, threshold
//! calibration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::datasets::{apply_labels, LabelTable};
use crate::event::EventId;
use crate::fingerprint::{fingerprint, mix_seed};
use crate::ingest::{ParsedMessage, TemplateStore};
use crate::mb::{classify_events, discover_all, symmetry_correct, EventClassification, MarkovBlanketMap, MbParams};
use crate::pattern::{
    calibrate_thresholds, compute_deviation_matrix, train_mean, train_mlp, BundleHeader, Fallback, MlpHyperParams,
    MlpTraining, ModelBundle, PatternModel,
};
use crate::scalar::Scalar;
use crate::sequencer::{build_ecm, partition, EventCountMatrix, PartitionReport, WindowSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub mb: MbParams,
    pub mlp: MlpHyperParams,
    pub margin: f64,
    pub seed: u64,
    pub parallel: bool,
    /// Skip blanket discovery and give every event a mean model.
    pub force_independent: bool,
    pub config_fingerprint: String,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            mb: MbParams::default(),
            mlp: MlpHyperParams::default(),
            margin: 1.0,
            seed: 0,
            parallel: true,
            force_independent: false,
            config_fingerprint: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub event_id: EventId,
    pub kind: String,
    pub mb_size: usize,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Fallback>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_rows: usize,
    pub val_rows: usize,
    pub events: usize,
    pub dependency_models: usize,
    pub proximity_models: usize,
    pub warnings: Vec<String>,
    pub per_event: Vec<EventSummary>,
}

fn require_normal(x: &EventCountMatrix) -> Result<()> {
    match x.labels().iter().position(|l| l.is_anomalous()) {
        Some(i) => Err(Error::AnomalousTrainingRow {
            sequence_id: x.sequence_ids()[i].clone(),
        }),
        None => Ok(()),
    }
}

/// Learns blankets and models on `train`, thresholds on `val`.
pub fn train<T: Scalar>(
    train: &EventCountMatrix,
    val: &EventCountMatrix,
    opts: &TrainOptions,
) -> Result<(ModelBundle<T>, TrainReport)> {
    opts.mb.validate()?;
    opts.mlp.validate()?;
    require_normal(train)?;
    require_normal(val)?;
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    if train.event_ids() != val.event_ids() || train.source() != val.source() {
        return Err(Error::Config("training and validation matrices come from different sources".into()));
    }
    let ids = train.event_ids();

    let blankets = if opts.force_independent {
        MarkovBlanketMap::empty(ids)
    } else {
        let raw = discover_all::<T>(train, &opts.mb, opts.parallel)?;
        symmetry_correct(&raw, opts.mb.symmetry)
    };

    let fit = |j: usize| -> MlpTraining<T> {
        let e = ids[j];
        let related: Vec<usize> = blankets
            .blanket(e)
            .map(|s| s.iter().filter_map(|&r| train.column_of(r)).collect())
            .unwrap_or_default();
        if related.is_empty() {
            return MlpTraining::Fallback {
                model: train_mean(train, j),
                reason: Fallback::ConstantInputs,
            };
        }
        train_mlp(train, j, &related, &opts.mlp, mix_seed(opts.seed, e.0 as u64))
    };
    let fits: Vec<MlpTraining<T>> = if opts.parallel {
        (0..ids.len()).into_par_iter().map(fit).collect()
    } else {
        (0..ids.len()).map(fit).collect()
    };

    let mut warnings = blankets.warnings.clone();
    let mut models = Vec::with_capacity(ids.len());
    let mut fallbacks = BTreeMap::new();
    let mut classification = EventClassification::default();
    let raw_classes = classify_events(&blankets);
    for (j, fit) in fits.into_iter().enumerate() {
        let e = ids[j];
        match fit {
            MlpTraining::Trained(m) => {
                classification.dependent.insert(e);
                models.push(PatternModel::Dependency(m));
            }
            MlpTraining::Fallback { model, reason } => {
                if raw_classes.is_dependent(e) {
                    warnings.push(format!("{e}: dependency model replaced by mean model ({reason:?})"));
                    fallbacks.insert(e, reason);
                }
                classification.independent.insert(e);
                models.push(PatternModel::Proximity(model));
            }
        }
    }

    let deviations = compute_deviation_matrix(val, &models, opts.parallel)?;
    let thresholds = calibrate_thresholds(&deviations, opts.margin)?;

    let header = BundleHeader {
        kind: BundleHeader::kind(),
        scalar: std::any::type_name::<T>().to_string(),
        config_fingerprint: opts.config_fingerprint.clone(),
        source: train.source().to_string(),
        seed: opts.seed,
        mlp: opts.mlp.clone(),
        mb_algorithm: blankets.algorithm.clone(),
        mb_alpha: blankets.alpha,
        mb_max_cond: blankets.max_cond,
        symmetry: blankets.symmetry,
        margin: opts.margin,
        classification,
        event_ids: ids.to_vec(),
        warnings: warnings.clone(),
    };
    let bundle = ModelBundle::new(header, blankets, models, thresholds, fallbacks)?;
    let report = report(&bundle, train.n_rows(), val.n_rows(), warnings);
    Ok((bundle, report))
}

fn report<T: Scalar>(bundle: &ModelBundle<T>, train_rows: usize, val_rows: usize, warnings: Vec<String>) -> TrainReport {
    let per_event: Vec<EventSummary> = bundle
        .models
        .iter()
        .zip(&bundle.thresholds.values)
        .map(|(m, t)| {
            let e = m.event_id();
            EventSummary {
                event_id: e,
                kind: if m.is_dependency() { "dependency" } else { "proximity" }.to_string(),
                mb_size: bundle.blankets.blanket(e).map_or(0, |s| s.len()),
                threshold: t.as_f64(),
                training_loss: match m {
                    PatternModel::Dependency(r) => Some(r.training_loss.as_f64()),
                    PatternModel::Proximity(_) => None,
                },
                fallback: bundle.fallbacks.get(&e).cloned(),
            }
        })
        .collect();
    let dependency_models = bundle.dependency_count();
    TrainReport {
        train_rows,
        val_rows,
        events: per_event.len(),
        dependency_models,
        proximity_models: per_event.len() - dependency_models,
        warnings,
        per_event,
    }
}

/// Source tag of matrices built from `store` under `window`. Training and
/// test matrices must share it.
pub fn log_source(store: &TemplateStore, window: &WindowSpec) -> String {
    let templates: Vec<String> = store.templates().iter().map(|t| t.text()).collect();
    format!("logs:{}", fingerprint(&(store.fingerprint(), templates, window)))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub partition: PartitionReport,
    pub rows: usize,
    pub anomalous_rows: usize,
    /// Sequences absent from the label table (kept with line labels).
    pub unlabeled: usize,
}

/// Windows parsed messages and counts them over the store's vocabulary.
pub fn log_matrix(
    store: &TemplateStore,
    messages: &[ParsedMessage],
    window: &WindowSpec,
    labels: Option<&LabelTable>,
) -> Result<(EventCountMatrix, MatrixReport)> {
    let (mut sequences, partition) = partition(messages, window)?;
    let unlabeled = labels.map_or(0, |t| apply_labels(&mut sequences, t));
    let x = build_ecm(&sequences, &store.vocabulary(), &log_source(store, window))?;
    let report = MatrixReport {
        partition,
        rows: x.n_rows(),
        anomalous_rows: x.labels().iter().filter(|l| l.is_anomalous()).count(),
        unlabeled,
    };
    Ok((x, report))
}

/// Chronological split holding out the last `fraction` of rows for testing.
pub fn holdout_split(x: &EventCountMatrix, fraction: f64) -> Result<(EventCountMatrix, EventCountMatrix)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("holdout fraction must lie in (0, 1), got {fraction}")));
    }
    let k = ((x.n_rows() as f64 * (1.0 - fraction)) - 1e-9).ceil().max(0.0) as usize;
    Ok(x.split_at(k))
}
