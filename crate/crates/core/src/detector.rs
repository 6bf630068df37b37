//! Scoring of count rows against a trained bundle.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventId;
use crate::jsonl;
use crate::pattern::{deviation_row, with_row, ModelBundle};
use crate::scalar::Scalar;
use crate::sequencer::EventCountMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation<T> {
    pub event_id: EventId,
    pub deviation: T,
    pub threshold: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict<T> {
    pub sequence_id: String,
    /// δ per bundle column.
    pub deviations: Vec<T>,
    /// Events with δ strictly above their threshold, in column order.
    pub violations: Vec<Violation<T>>,
    pub unseen_event_hit: bool,
    pub is_anomaly: bool,
}

impl<T: Scalar> Verdict<T> {
    pub fn violated_events(&self) -> impl Iterator<Item = EventId> + '_ {
        self.violations.iter().map(|v| v.event_id)
    }
}

/// Scores one row given in bundle column order.
pub fn score_sequence<T: Scalar>(sequence_id: &str, row: &[T], bundle: &ModelBundle<T>) -> Result<Verdict<T>> {
    let schema = bundle.schema();
    if row.len() != schema.len() {
        return Err(Error::Config(format!(
            "row has {} columns, bundle has {}",
            row.len(),
            schema.len()
        )));
    }
    let deviations = deviation_row(row, &bundle.models, schema)?;
    let thresholds = &bundle.thresholds.values;
    let violations: Vec<Violation<T>> = deviations
        .iter()
        .zip(thresholds)
        .zip(schema.event_ids())
        .filter(|((d, t), _)| *d > *t)
        .map(|((&deviation, &threshold), &event_id)| Violation {
            event_id,
            deviation,
            threshold,
        })
        .collect();
    let unseen_event_hit = schema.column(EventId::UNSEEN).is_some_and(|j| row[j] > T::zero());
    Ok(Verdict {
        sequence_id: sequence_id.to_string(),
        is_anomaly: unseen_event_hit || !violations.is_empty(),
        deviations,
        violations,
        unseen_event_hit,
    })
}

/// Scores every row of `x`, in order. `x` must come from the same source
/// and have the bundle's columns.
pub fn detect_batch<T: Scalar>(x: &EventCountMatrix, bundle: &ModelBundle<T>, parallel: bool) -> Result<Vec<Verdict<T>>> {
    if x.source() != bundle.header.source {
        return Err(Error::FingerprintMismatch {
            expected: bundle.header.source.clone(),
            found: x.source().to_string(),
        });
    }
    bundle.schema().check(x.event_ids())?;
    let one = |i: usize| {
        score_sequence(&x.sequence_ids()[i], &x.row_as::<T>(i), bundle).map_err(|e| with_row(e, i, x))
    };
    if parallel {
        (0..x.n_rows()).into_par_iter().map(one).collect()
    } else {
        (0..x.n_rows()).map(one).collect()
    }
}

pub fn count_anomalies<T>(verdicts: &[Verdict<T>]) -> usize {
    verdicts.iter().filter(|v| v.is_anomaly).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictHeader {
    pub kind: String,
    pub bundle_hash: String,
    pub config_fingerprint: String,
    pub source: String,
    pub margin: f64,
    pub sequences: usize,
    pub anomalies: usize,
}

/// One verdict line; the violation list doubles as the explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord<T> {
    pub sequence_id: String,
    pub is_anomaly: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unseen_event_hit: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation<T>>,
}

pub fn write_verdicts<T: Scalar, W: Write>(out: &mut W, bundle: &ModelBundle<T>, verdicts: &[Verdict<T>]) -> Result<()> {
    jsonl::write_record(
        out,
        &VerdictHeader {
            kind: "verdicts".into(),
            bundle_hash: crate::fingerprint::hash_bytes(&bundle.to_bytes()),
            config_fingerprint: bundle.header.config_fingerprint.clone(),
            source: bundle.header.source.clone(),
            margin: bundle.thresholds.margin,
            sequences: verdicts.len(),
            anomalies: count_anomalies(verdicts),
        },
    )?;
    for v in verdicts {
        jsonl::write_record(
            out,
            &VerdictRecord {
                sequence_id: v.sequence_id.clone(),
                is_anomaly: v.is_anomaly,
                unseen_event_hit: v.unseen_event_hit,
                violations: v.violations.clone(),
            },
        )?;
    }
    Ok(())
}

pub fn read_verdicts<T: Scalar, R: BufRead>(reader: R, origin: &str) -> Result<(VerdictHeader, Vec<VerdictRecord<T>>)> {
    jsonl::read_all(reader, origin)
}
