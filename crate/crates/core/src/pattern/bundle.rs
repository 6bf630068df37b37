use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Fallback, MlpHyperParams, PatternModel, Schema, ThresholdVector};
use crate::error::{Error, Result};
use crate::event::EventId;
use crate::jsonl;
use crate::mb::{EventClassification, MarkovBlanketMap, SymmetryRule};
use crate::scalar::Scalar;

const KIND: &str = "logdp-model-bundle";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub kind: String,
    pub scalar: String,
    /// Fingerprint of the run configuration that produced the bundle.
    pub config_fingerprint: String,
    /// Source fingerprint of the training matrix; test data must match it.
    pub source: String,
    pub seed: u64,
    pub mlp: MlpHyperParams,
    pub mb_algorithm: String,
    pub mb_alpha: f64,
    pub mb_max_cond: usize,
    pub symmetry: Option<SymmetryRule>,
    pub margin: f64,
    /// Classification by the models actually used: an event whose
    /// regressor fell back to a mean model is listed as independent.
    pub classification: EventClassification,
    pub event_ids: Vec<EventId>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord<T> {
    pub event_id: EventId,
    pub related: Vec<EventId>,
    pub model: PatternModel<T>,
    pub column_max: T,
    pub threshold: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<Fallback>,
}

/// Everything detection needs: one model and one threshold per column.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<T> {
    pub header: BundleHeader,
    pub blankets: MarkovBlanketMap,
    pub models: Vec<PatternModel<T>>,
    pub thresholds: ThresholdVector<T>,
    pub fallbacks: BTreeMap<EventId, Fallback>,
    schema: Schema,
}

impl<T: Scalar> ModelBundle<T> {
    pub fn new(
        header: BundleHeader,
        blankets: MarkovBlanketMap,
        models: Vec<PatternModel<T>>,
        thresholds: ThresholdVector<T>,
        fallbacks: BTreeMap<EventId, Fallback>,
    ) -> Result<Self> {
        let ids: Vec<EventId> = models.iter().map(|m| m.event_id()).collect();
        if ids != header.event_ids || ids != thresholds.event_ids {
            return Err(Error::Config("bundle models, thresholds and header disagree on columns".into()));
        }
        for m in &models {
            if m.is_dependency() != header.classification.is_dependent(m.event_id()) {
                return Err(Error::Config(format!(
                    "event {} model kind disagrees with its classification",
                    m.event_id()
                )));
            }
        }
        Ok(Self {
            schema: Schema::new(ids),
            header,
            blankets,
            models,
            thresholds,
            fallbacks,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn event_ids(&self) -> &[EventId] {
        self.schema.event_ids()
    }

    pub fn dependency_count(&self) -> usize {
        self.models.iter().filter(|m| m.is_dependency()).count()
    }

    /// Same models with thresholds recomputed at another margin.
    pub fn with_margin(&self, margin: f64) -> Result<Self> {
        let mut b = self.clone();
        b.thresholds = self.thresholds.rescaled(margin)?;
        b.header.margin = margin;
        Ok(b)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        jsonl::write_record(out, &self.header)?;
        for (j, model) in self.models.iter().enumerate() {
            let e = model.event_id();
            let record = EventRecord {
                event_id: e,
                related: self.blankets.blanket(e).map(|s| s.iter().copied().collect()).unwrap_or_default(),
                model: model.clone(),
                column_max: self.thresholds.column_max[j],
                threshold: self.thresholds.values[j],
                fallback: self.fallbacks.get(&e).cloned(),
            };
            jsonl::write_record(out, &record)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_from<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let (header, records): (BundleHeader, Vec<EventRecord<T>>) = jsonl::read_all(reader, origin)?;
        if header.kind != KIND {
            return Err(Error::Format {
                path: origin.to_string(),
                line: 1,
                message: format!("not a model bundle (kind {:?})", header.kind),
            });
        }
        let mut blankets = MarkovBlanketMap::from_blankets(
            records.iter().map(|r| (r.event_id, r.related.iter().copied().collect())).collect(),
            header.mb_alpha,
            header.mb_max_cond,
            header.symmetry,
        );
        blankets.algorithm = header.mb_algorithm.clone();
        let thresholds = ThresholdVector {
            event_ids: records.iter().map(|r| r.event_id).collect(),
            column_max: records.iter().map(|r| r.column_max).collect(),
            margin: header.margin,
            values: records.iter().map(|r| r.threshold).collect(),
        };
        let fallbacks = records
            .iter()
            .filter_map(|r| r.fallback.clone().map(|f| (r.event_id, f)))
            .collect();
        let models = records.into_iter().map(|r| r.model).collect();
        Self::new(header, blankets, models, thresholds, fallbacks)
    }
}

impl BundleHeader {
    pub(crate) fn kind() -> String {
        KIND.to_string()
    }
}
