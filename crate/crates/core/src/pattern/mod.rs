//! Per-event pattern models, validation deviations and thresholds.

mod bundle;
pub mod mlp;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventId;
use crate::scalar::Scalar;
use crate::sequencer::EventCountMatrix;

pub use bundle::{BundleHeader, EventRecord, ModelBundle};
pub use mlp::{train_mlp, Activation, Fallback, MlpHyperParams, MlpRegressor, MlpTraining, Network, Optimizer};

/// Column layout of a count row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    event_ids: Vec<EventId>,
    index: HashMap<EventId, usize>,
}

impl Schema {
    pub fn new(event_ids: Vec<EventId>) -> Self {
        let index = event_ids.iter().enumerate().map(|(j, &e)| (e, j)).collect();
        Self { event_ids, index }
    }

    pub fn event_ids(&self) -> &[EventId] {
        &self.event_ids
    }

    pub fn column(&self, e: EventId) -> Option<usize> {
        self.index.get(&e).copied()
    }

    pub fn len(&self) -> usize {
        self.event_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_ids.is_empty()
    }

    /// Errors unless `other` has exactly these columns in this order.
    pub fn check(&self, other: &[EventId]) -> Result<()> {
        if self.event_ids == other {
            return Ok(());
        }
        let missing = self.event_ids.iter().filter(|e| !other.contains(e)).copied().collect();
        let unexpected = other.iter().filter(|e| self.column(**e).is_none()).copied().collect();
        Err(Error::SchemaMismatch { missing, unexpected })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanModel<T> {
    pub event_id: EventId,
    pub mean: T,
}

/// Mean of one training column. An empty matrix gives mean 0.
pub fn train_mean<T: Scalar>(x: &EventCountMatrix, focused: usize) -> MeanModel<T> {
    let n = x.n_rows();
    let total: u64 = x.rows().map(|r| r[focused] as u64).sum();
    let mean = if n == 0 { T::zero() } else { T::lit(total as f64 / n as f64) };
    MeanModel {
        event_id: x.event_ids()[focused],
        mean,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model")]
pub enum PatternModel<T> {
    Dependency(MlpRegressor<T>),
    Proximity(MeanModel<T>),
}

impl<T: Scalar> PatternModel<T> {
    pub fn event_id(&self) -> EventId {
        match self {
            PatternModel::Dependency(m) => m.event_id,
            PatternModel::Proximity(m) => m.event_id,
        }
    }

    pub fn is_dependency(&self) -> bool {
        matches!(self, PatternModel::Dependency(_))
    }

    /// Expected count of the model's event given a full count row.
    pub fn predict_expected(&self, row: &[T], schema: &Schema) -> Result<T> {
        match self {
            PatternModel::Proximity(m) => Ok(m.mean),
            PatternModel::Dependency(m) => m.predict(row, schema),
        }
    }
}

/// `|observed - expected|` per (row, column), row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationMatrix<T> {
    pub event_ids: Vec<EventId>,
    pub n_rows: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> DeviationMatrix<T> {
    pub fn row(&self, i: usize) -> &[T] {
        let m = self.event_ids.len();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.event_ids.len() + j]
    }
}

/// Deviations of one count row against `models` (one per column, in
/// column order).
pub fn deviation_row<T: Scalar>(row: &[T], models: &[PatternModel<T>], schema: &Schema) -> Result<Vec<T>> {
    models
        .iter()
        .zip(row)
        .map(|(model, &c)| {
            model
                .predict_expected(row, schema)
                .map(|expected| (c - expected).abs())
                .map_err(|e| (model.event_id(), e))
        })
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|(event, e)| Error::AtRow {
            row: 0,
            sequence_id: String::new(),
            event,
            source: Box::new(e),
        })
}

fn check_models<T: Scalar>(x: &EventCountMatrix, models: &[PatternModel<T>]) -> Result<Schema> {
    let ids: Vec<EventId> = models.iter().map(|m| m.event_id()).collect();
    let schema = Schema::new(ids);
    schema.check(x.event_ids())?;
    Ok(schema)
}

pub fn compute_deviation_matrix<T: Scalar>(
    x: &EventCountMatrix,
    models: &[PatternModel<T>],
    parallel: bool,
) -> Result<DeviationMatrix<T>> {
    let schema = check_models(x, models)?;
    let one = |i: usize| -> Result<Vec<T>> {
        deviation_row(&x.row_as::<T>(i), models, &schema).map_err(|e| with_row(e, i, x))
    };
    let rows: Vec<Vec<T>> = if parallel {
        (0..x.n_rows()).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..x.n_rows()).map(one).collect::<Result<_>>()?
    };
    Ok(DeviationMatrix {
        event_ids: schema.event_ids().to_vec(),
        n_rows: rows.len(),
        values: rows.into_iter().flatten().collect(),
    })
}

pub(crate) fn with_row(e: Error, row: usize, x: &EventCountMatrix) -> Error {
    let sequence_id = x.sequence_ids()[row].clone();
    match e {
        Error::AtRow { event, source, .. } => Error::AtRow {
            row,
            sequence_id,
            event,
            source,
        },
        other => other,
    }
}

/// Per-event thresholds: `values[j] = margin * column_max[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector<T> {
    pub event_ids: Vec<EventId>,
    pub column_max: Vec<T>,
    pub margin: f64,
    pub values: Vec<T>,
}

impl<T: Scalar> ThresholdVector<T> {
    pub fn from_maxima(event_ids: Vec<EventId>, column_max: Vec<T>, margin: f64) -> Result<Self> {
        if !(margin >= 1.0 && margin.is_finite()) {
            return Err(Error::Config(format!("margin must be a finite factor >= 1, got {margin}")));
        }
        let values = column_max.iter().map(|&v| T::lit(margin) * v).collect();
        Ok(Self {
            event_ids,
            column_max,
            margin,
            values,
        })
    }

    pub fn rescaled(&self, margin: f64) -> Result<Self> {
        Self::from_maxima(self.event_ids.clone(), self.column_max.clone(), margin)
    }
}

pub fn calibrate_thresholds<T: Scalar>(d: &DeviationMatrix<T>, margin: f64) -> Result<ThresholdVector<T>> {
    if d.n_rows == 0 {
        return Err(Error::EmptyValidation);
    }
    let m = d.event_ids.len();
    let mut max = vec![T::zero(); m];
    for i in 0..d.n_rows {
        for (acc, &v) in max.iter_mut().zip(d.row(i)) {
            if v > *acc {
                *acc = v;
            }
        }
    }
    ThresholdVector::from_maxima(d.event_ids.clone(), max, margin)
}
