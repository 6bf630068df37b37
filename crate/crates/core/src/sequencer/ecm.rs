use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::window::LogSequence;
use crate::error::{Error, Result};
use crate::event::{EventId, Label};
use crate::jsonl;
use crate::scalar::Scalar;

/// Event count matrix: `counts[i][j]` is how often event `event_ids[j]`
/// occurs in sequence `i`. Columns are in ascending event id order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventCountMatrix {
    event_ids: Vec<EventId>,
    sequence_ids: Vec<String>,
    labels: Vec<Label>,
    counts: Vec<u32>,
    /// Fingerprint of whatever produced the columns (parser config or
    /// synthetic spec). Detection refuses to mix sources.
    source: String,
}

impl EventCountMatrix {
    pub fn new(event_ids: Vec<EventId>, source: impl Into<String>) -> Result<Self> {
        if event_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("ECM columns must be strictly ascending event ids".into()));
        }
        Ok(Self {
            event_ids,
            sequence_ids: Vec::new(),
            labels: Vec::new(),
            counts: Vec::new(),
            source: source.into(),
        })
    }

    /// Builds a matrix from dense rows; used by generators and tests.
    pub fn from_rows(
        event_ids: Vec<EventId>,
        source: impl Into<String>,
        rows: impl IntoIterator<Item = (String, Label, Vec<u32>)>,
    ) -> Result<Self> {
        let mut ecm = Self::new(event_ids, source)?;
        for (id, label, row) in rows {
            ecm.push_row(id, label, &row)?;
        }
        Ok(ecm)
    }

    pub fn push_row(&mut self, sequence_id: String, label: Label, row: &[u32]) -> Result<()> {
        if row.len() != self.event_ids.len() {
            return Err(Error::Config(format!(
                "row has {} columns, matrix has {}",
                row.len(),
                self.event_ids.len()
            )));
        }
        self.sequence_ids.push(sequence_id);
        self.labels.push(label);
        self.counts.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.sequence_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.event_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence_ids.is_empty()
    }

    pub fn event_ids(&self) -> &[EventId] {
        &self.event_ids
    }

    pub fn sequence_ids(&self) -> &[String] {
        &self.sequence_ids
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let m = self.n_cols();
        &self.counts[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.n_cols() + j]
    }

    pub fn column_of(&self, event: EventId) -> Option<usize> {
        self.event_ids.binary_search(&event).ok()
    }

    pub fn column<T: Scalar>(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| T::from_count(r[j])).collect()
    }

    pub fn row_as<T: Scalar>(&self, i: usize) -> Vec<T> {
        self.row(i).iter().map(|&c| T::from_count(c)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Rows `indices`, in the given order, sharing column metadata.
    pub fn select_rows(&self, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut out = Self {
            event_ids: self.event_ids.clone(),
            sequence_ids: Vec::new(),
            labels: Vec::new(),
            counts: Vec::new(),
            source: self.source.clone(),
        };
        for i in indices {
            out.sequence_ids.push(self.sequence_ids[i].clone());
            out.labels.push(self.labels[i]);
            out.counts.extend_from_slice(self.row(i));
        }
        out
    }

    /// First `k` rows and the remainder, order preserved.
    pub fn split_at(&self, k: usize) -> (Self, Self) {
        let k = k.min(self.n_rows());
        (self.select_rows(0..k), self.select_rows(k..self.n_rows()))
    }

    pub fn normal_rows(&self) -> Self {
        self.select_rows((0..self.n_rows()).filter(|&i| !self.labels[i].is_anomalous()))
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        jsonl::write_record(
            out,
            &EcmHeader {
                kind: "event_count_matrix".into(),
                source: self.source.clone(),
                event_ids: self.event_ids.clone(),
                rows: self.n_rows(),
            },
        )?;
        for i in 0..self.n_rows() {
            let counts: Vec<(usize, u32)> = self
                .row(i)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(j, &c)| (j, c))
                .collect();
            jsonl::write_record(
                out,
                &EcmRecord {
                    sequence_id: self.sequence_ids[i].clone(),
                    label: self.labels[i],
                    counts,
                },
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let (header, records): (EcmHeader, Vec<EcmRecord>) = jsonl::read_all(reader, origin)?;
        let m = header.event_ids.len();
        let mut ecm = Self::new(header.event_ids, header.source)?;
        let mut dense = vec![0u32; m];
        for (idx, rec) in records.into_iter().enumerate() {
            dense.iter_mut().for_each(|c| *c = 0);
            for (j, c) in rec.counts {
                if j >= m {
                    return Err(Error::Format {
                        path: origin.to_string(),
                        line: idx + 2,
                        message: format!("column {j} out of range (matrix has {m})"),
                    });
                }
                dense[j] = c;
            }
            ecm.push_row(rec.sequence_id, rec.label, &dense)?;
        }
        if ecm.n_rows() != header.rows {
            return Err(Error::Format {
                path: origin.to_string(),
                line: 1,
                message: format!("header announces {} rows, found {}", header.rows, ecm.n_rows()),
            });
        }
        Ok(ecm)
    }
}

#[derive(Serialize, Deserialize)]
struct EcmHeader {
    kind: String,
    source: String,
    event_ids: Vec<EventId>,
    rows: usize,
}

/// Sparse row: `(column index, count)` pairs for non-zero entries.
#[derive(Serialize, Deserialize)]
struct EcmRecord {
    sequence_id: String,
    label: Label,
    counts: Vec<(usize, u32)>,
}

/// Counts event occurrences per sequence over `vocabulary` (ascending ids).
pub fn build_ecm(sequences: &[LogSequence], vocabulary: &[EventId], source: &str) -> Result<EventCountMatrix> {
    let mut ecm = EventCountMatrix::new(vocabulary.to_vec(), source)?;
    let index: HashMap<EventId, usize> = vocabulary.iter().enumerate().map(|(j, &e)| (e, j)).collect();
    let mut row = vec![0u32; vocabulary.len()];
    for seq in sequences {
        row.iter_mut().for_each(|c| *c = 0);
        for e in &seq.events {
            let j = *index.get(e).ok_or(Error::UnknownEvent(*e))?;
            row[j] += 1;
        }
        ecm.push_row(seq.sequence_id.clone(), seq.label, &row)?;
    }
    Ok(ecm)
}

/// Chronological split: the first `ceil(n * ratio)` rows train, the rest
/// validate. Both parts must be non-empty and every row normal.
pub fn split_train_val(x: &EventCountMatrix, ratio: f64) -> Result<(EventCountMatrix, EventCountMatrix)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    if let Some(i) = x.labels().iter().position(|l| l.is_anomalous()) {
        return Err(Error::AnomalousTrainingRow {
            sequence_id: x.sequence_ids()[i].clone(),
        });
    }
    let n = x.n_rows();
    // guard against n * ratio landing a hair above an integer
    let k = ((n as f64 * ratio) - 1e-9).ceil().max(0.0) as usize;
    let (train, val) = x.split_at(k);
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if val.is_empty() {
        return Err(Error::EmptyValidation);
    }
    Ok((train, val))
}
