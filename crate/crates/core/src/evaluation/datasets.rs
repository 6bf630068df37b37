//! Ground-truth label tables.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::event::Label;
use crate::sequencer::LogSequence;

/// Sequence id to label.
pub type LabelTable = HashMap<String, Label>;

/// Reads `id,label` rows such as the HDFS `anomaly_label.csv`. A first row
/// whose label column does not parse is taken as a header.
pub fn read_label_csv<R: BufRead>(reader: R, origin: &str) -> Result<LabelTable> {
    let mut table = LabelTable::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Format {
            path: origin.to_string(),
            line: idx + 1,
            message,
        };
        let (id, label) = line
            .rsplit_once(',')
            .ok_or_else(|| bad("expected `id,label`".into()))?;
        match Label::parse(label.trim()) {
            Some(l) => {
                table.insert(id.trim().to_string(), l);
            }
            None if idx == 0 => {}
            None => return Err(bad(format!("unknown label {label:?}"))),
        }
    }
    Ok(table)
}

/// Overrides sequence labels from `table`. Sequences missing from the table
/// keep their line-derived label; the count of those is returned.
pub fn apply_labels(sequences: &mut [LogSequence], table: &LabelTable) -> usize {
    let mut missing = 0;
    for s in sequences {
        match table.get(&s.sequence_id) {
            Some(&l) => s.label = l,
            None => missing += 1,
        }
    }
    missing
}
