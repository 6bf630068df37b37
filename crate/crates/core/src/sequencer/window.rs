use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventId, Label};
use crate::ingest::ParsedMessage;

/// Unit of a sliding window's size and step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowUnit {
    Count,
    Seconds,
}

/// How messages are grouped into sequences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WindowSpec {
    /// One sequence per session key, in order of first appearance.
    #[default]
    Session,
    /// Consecutive non-overlapping windows of `size` messages.
    FixedCount { size: usize },
    /// Non-overlapping windows of `seconds`, anchored at the earliest timestamp.
    FixedTime { seconds: i64 },
    /// Overlapping windows of `size` advanced by `step` (`0 < step <= size`).
    Sliding { size: i64, step: i64, unit: WindowUnit },
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WindowSpec::Session => Ok(()),
            WindowSpec::FixedCount { size: 0 } => Err(Error::Config("window size must be > 0".into())),
            WindowSpec::FixedTime { seconds } if seconds <= 0 => {
                Err(Error::Config("window length must be > 0 seconds".into()))
            }
            WindowSpec::Sliding { size, step, .. } if !(0 < step && step <= size) => Err(Error::Config(format!(
                "sliding window needs 0 < step <= size, got size {size}, step {step}"
            ))),
            _ => Ok(()),
        }
    }
}

/// A group of messages: one ECM row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSequence {
    pub sequence_id: String,
    pub line_nos: Vec<u64>,
    pub events: Vec<EventId>,
    pub label: Label,
}

impl LogSequence {
    fn from_members(sequence_id: String, members: &[&ParsedMessage]) -> Self {
        LogSequence {
            sequence_id,
            line_nos: members.iter().map(|m| m.line_no).collect(),
            events: members.iter().map(|m| m.template_id).collect(),
            label: members
                .iter()
                .fold(Label::Normal, |acc, m| acc | m.label.unwrap_or_default()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub sequences: usize,
    /// Messages without a session key (session mode only); excluded.
    pub missing_session_key: u64,
}

/// Groups `messages` (in file order) into sequences according to `spec`.
pub fn partition(messages: &[ParsedMessage], spec: &WindowSpec) -> Result<(Vec<LogSequence>, PartitionReport)> {
    spec.validate()?;
    let mut report = PartitionReport::default();
    let sequences = match *spec {
        WindowSpec::Session => {
            let mut order: Vec<&str> = Vec::new();
            let mut groups: HashMap<&str, Vec<&ParsedMessage>> = HashMap::new();
            for m in messages {
                let Some(key) = m.session_key.as_deref() else {
                    report.missing_session_key += 1;
                    continue;
                };
                groups
                    .entry(key)
                    .or_insert_with(|| {
                        order.push(key);
                        Vec::new()
                    })
                    .push(m);
            }
            order
                .into_iter()
                .map(|k| LogSequence::from_members(k.to_string(), &groups[k]))
                .collect()
        }
        WindowSpec::FixedCount { size } => messages
            .chunks(size)
            .enumerate()
            .map(|(i, chunk)| {
                let members: Vec<_> = chunk.iter().collect();
                LogSequence::from_members(i.to_string(), &members)
            })
            .collect(),
        WindowSpec::FixedTime { seconds } => {
            let stamps = timestamps(messages)?;
            let Some(&t0) = stamps.iter().min() else {
                return Ok((Vec::new(), report));
            };
            let mut windows: BTreeMap<i64, Vec<&ParsedMessage>> = BTreeMap::new();
            for (m, &t) in messages.iter().zip(&stamps) {
                windows.entry((t - t0).div_euclid(seconds)).or_default().push(m);
            }
            windows
                .into_iter()
                .map(|(k, members)| LogSequence::from_members(k.to_string(), &members))
                .collect()
        }
        WindowSpec::Sliding {
            size,
            step,
            unit: WindowUnit::Count,
        } => sliding_count(messages, size as usize, step as usize),
        WindowSpec::Sliding {
            size,
            step,
            unit: WindowUnit::Seconds,
        } => sliding_time(messages, &timestamps(messages)?, size, step),
    };
    report.sequences = sequences.len();
    Ok((sequences, report))
}

fn timestamps(messages: &[ParsedMessage]) -> Result<Vec<i64>> {
    messages
        .iter()
        .map(|m| m.timestamp.ok_or(Error::MissingTimestamp { line_no: m.line_no }))
        .collect()
}

/// Full windows while they fit; when the last one leaves a tail uncovered a
/// single trailing partial window is added so every message is in a window.
fn sliding_count(messages: &[ParsedMessage], size: usize, step: usize) -> Vec<LogSequence> {
    let n = messages.len();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut start = 0;
    loop {
        let end = (start + size).min(n);
        let members: Vec<_> = messages[start..end].iter().collect();
        out.push(LogSequence::from_members(out.len().to_string(), &members));
        if start + size >= n {
            break;
        }
        start += step;
    }
    out
}

/// Windows `[t0 + k*step, t0 + k*step + size)`, stopping after the first
/// window that reaches past the last timestamp. Empty windows are skipped.
fn sliding_time(messages: &[ParsedMessage], stamps: &[i64], size: i64, step: i64) -> Vec<LogSequence> {
    let (Some(&t0), Some(&t_last)) = (stamps.iter().min(), stamps.iter().max()) else {
        return Vec::new();
    };
    let mut windows: BTreeMap<i64, Vec<&ParsedMessage>> = BTreeMap::new();
    // smallest k whose window end passes t_last
    let k_stop = ((t_last - t0 - size).div_euclid(step) + 1).max(0);
    for (m, &t) in messages.iter().zip(stamps) {
        let offset = t - t0;
        // k with k*step <= offset < k*step + size
        let k_lo = ((offset - size).div_euclid(step) + 1).max(0);
        let k_hi = offset.div_euclid(step).min(k_stop);
        for k in k_lo..=k_hi {
            windows.entry(k).or_default().push(m);
        }
    }
    windows
        .into_iter()
        .map(|(k, members)| LogSequence::from_members(k.to_string(), &members))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn msg(line_no: u64, event: u32, key: Option<&str>, ts: Option<i64>, label: Option<Label>) -> ParsedMessage {
        ParsedMessage {
            line_no,
            template_id: EventId(event),
            timestamp: ts,
            session_key: key.map(String::from),
            label,
        }
    }

    fn plain(n: usize) -> Vec<ParsedMessage> {
        (0..n).map(|i| msg(i as u64 + 1, 0, None, Some(i as i64), None)).collect()
    }

    fn sizes(seqs: &[LogSequence]) -> Vec<usize> {
        seqs.iter().map(|s| s.line_nos.len()).collect()
    }

    #[test]
    fn fixed_count_keeps_trailing_partial_window() {
        let (seqs, _) = partition(&plain(5), &WindowSpec::FixedCount { size: 2 }).unwrap();
        assert_eq!(sizes(&seqs), [2, 2, 1]);
    }

    #[test]
    fn session_grouping() {
        let msgs = vec![
            msg(1, 0, Some("a"), None, None),
            msg(2, 1, Some("b"), None, None),
            msg(3, 0, Some("a"), None, None),
            msg(4, 1, None, None, None),
        ];
        let (seqs, report) = partition(&msgs, &WindowSpec::Session).unwrap();
        assert_eq!(sizes(&seqs), [2, 1]);
        assert_eq!(seqs[0].sequence_id, "a");
        assert_eq!(report.missing_session_key, 1);
    }

    #[test]
    fn sliding_full_windows() {
        let spec = WindowSpec::Sliding { size: 3, step: 1, unit: WindowUnit::Count };
        let (seqs, _) = partition(&plain(5), &spec).unwrap();
        assert_eq!(sizes(&seqs), [3, 3, 3]);
    }

    #[test]
    fn sliding_adds_tail_window_when_needed() {
        let spec = WindowSpec::Sliding { size: 3, step: 2, unit: WindowUnit::Count };
        let (seqs, _) = partition(&plain(6), &spec).unwrap();
        assert_eq!(sizes(&seqs), [3, 3, 2]);
    }

    #[test]
    fn fixed_time_windows() {
        let msgs: Vec<_> = [0, 5, 9, 10, 31].iter().enumerate()
            .map(|(i, &t)| msg(i as u64 + 1, 0, None, Some(1000 + t), None))
            .collect();
        let (seqs, _) = partition(&msgs, &WindowSpec::FixedTime { seconds: 10 }).unwrap();
        assert_eq!(sizes(&seqs), [3, 1, 1]);
        assert_eq!(seqs[2].sequence_id, "3");
    }

    #[test]
    fn sliding_time_windows() {
        let msgs: Vec<_> = [0, 1, 2, 3, 4].iter().enumerate()
            .map(|(i, &t)| msg(i as u64 + 1, 0, None, Some(t), None))
            .collect();
        let spec = WindowSpec::Sliding { size: 3, step: 1, unit: WindowUnit::Seconds };
        let (seqs, _) = partition(&msgs, &spec).unwrap();
        assert_eq!(sizes(&seqs), [3, 3, 3]);
    }

    #[test]
    fn missing_timestamp_names_line() {
        let mut msgs = plain(3);
        msgs[1].timestamp = None;
        let err = partition(&msgs, &WindowSpec::FixedTime { seconds: 5 }).unwrap_err();
        assert!(matches!(err, Error::MissingTimestamp { line_no: 2 }));
    }

    #[test]
    fn invalid_sliding_rejected() {
        let spec = WindowSpec::Sliding { size: 2, step: 3, unit: WindowUnit::Count };
        assert!(partition(&plain(3), &spec).is_err());
        let spec = WindowSpec::Sliding { size: 2, step: 0, unit: WindowUnit::Count };
        assert!(partition(&plain(3), &spec).is_err());
    }

    #[test]
    fn window_label_is_or_of_members() {
        let mut msgs = plain(4);
        let (seqs, _) = partition(&msgs, &WindowSpec::FixedCount { size: 2 }).unwrap();
        assert!(seqs.iter().all(|s| s.label == Label::Normal));
        msgs[3].label = Some(Label::Anomalous);
        let (seqs, _) = partition(&msgs, &WindowSpec::FixedCount { size: 2 }).unwrap();
        assert_eq!(seqs[0].label, Label::Normal);
        assert_eq!(seqs[1].label, Label::Anomalous);
    }

    proptest! {
        #[test]
        fn every_message_covered_once_in_fixed_modes(n in 0usize..60, size in 1usize..9) {
            let msgs = plain(n);
            let (seqs, _) = partition(&msgs, &WindowSpec::FixedCount { size }).unwrap();
            let mut seen: Vec<u64> = seqs.iter().flat_map(|s| s.line_nos.clone()).collect();
            seen.sort();
            prop_assert_eq!(seen, (1..=n as u64).collect::<Vec<_>>());
            let (seqs, _) = partition(&msgs, &WindowSpec::FixedTime { seconds: size as i64 }).unwrap();
            let total: usize = seqs.iter().map(|s| s.line_nos.len()).sum();
            prop_assert_eq!(total, n);
        }

        #[test]
        fn sliding_multiplicity(n in 1usize..80, step in 1usize..5, mult in 1usize..4, extra in 0usize..4, time in any::<bool>()) {
            let size = step * mult + extra;
            let unit = if time { WindowUnit::Seconds } else { WindowUnit::Count };
            let spec = WindowSpec::Sliding { size: size as i64, step: step as i64, unit };
            let msgs = plain(n);
            let (seqs, _) = partition(&msgs, &spec).unwrap();
            let mut hits = vec![0usize; n];
            for s in &seqs {
                for &l in &s.line_nos {
                    hits[l as usize - 1] += 1;
                }
            }
            prop_assert!(hits.iter().all(|&h| h >= 1));
            // interior messages: between the first full window's end and the last window's start
            let last_start = seqs.last().unwrap().line_nos[0] as usize - 1;
            for i in size..last_start {
                let h = hits[i];
                prop_assert!(h == size / step || h == size.div_ceil(step), "message {} in {} windows", i, h);
                if size % step == 0 {
                    prop_assert_eq!(h, size / step);
                }
            }
        }

        #[test]
        fn flipping_one_label_flips_window(n in 1usize..30, size in 1usize..6, pick in any::<prop::sample::Index>()) {
            let mut msgs = plain(n);
            let i = pick.index(n);
            msgs[i].label = Some(Label::Anomalous);
            let (seqs, _) = partition(&msgs, &WindowSpec::FixedCount { size }).unwrap();
            for s in seqs {
                let contains = s.line_nos.contains(&(i as u64 + 1));
                prop_assert_eq!(s.label == Label::Anomalous, contains);
            }
        }
    }
}
