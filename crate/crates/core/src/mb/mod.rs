//! Markov blanket discovery over event count matrix columns.

mod ci;
mod iamb;
mod linalg;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ci::{ci_test, fisher_z, CiTestResult, CorrelationMatrix, RIDGE, R_CLAMP};
pub use iamb::{discover_mb, BlanketSearch};

use crate::error::Result;
use crate::event::EventId;
use crate::jsonl;
use crate::scalar::Scalar;
use crate::sequencer::EventCountMatrix;

pub const ALGORITHM: &str = "incremental-association";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryRule {
    /// Keep `j` in MB(i) only if `i` is in MB(j).
    And,
    /// Add `i` to MB(j) whenever `j` is in MB(i).
    Or,
}

impl std::str::FromStr for SymmetryRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(SymmetryRule::And),
            "or" => Ok(SymmetryRule::Or),
            other => Err(format!("unknown symmetry rule {other:?} (expected and|or)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MbParams {
    pub alpha: f64,
    pub max_cond: usize,
    pub symmetry: SymmetryRule,
}

impl Default for MbParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            max_cond: 8,
            symmetry: SymmetryRule::And,
        }
    }
}

impl MbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(crate::Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Related events of every event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovBlanketMap {
    pub algorithm: String,
    pub alpha: f64,
    pub max_cond: usize,
    /// `None` for a raw (uncorrected) search result.
    pub symmetry: Option<SymmetryRule>,
    blankets: BTreeMap<EventId, BTreeSet<EventId>>,
    #[serde(default)]
    pub degenerate: BTreeSet<EventId>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MarkovBlanketMap {
    pub fn from_blankets(
        blankets: BTreeMap<EventId, BTreeSet<EventId>>,
        alpha: f64,
        max_cond: usize,
        symmetry: Option<SymmetryRule>,
    ) -> Self {
        let blankets = blankets
            .into_iter()
            .map(|(e, mut s)| {
                s.remove(&e);
                (e, s)
            })
            .collect();
        Self {
            algorithm: ALGORITHM.to_string(),
            alpha,
            max_cond,
            symmetry,
            blankets,
            degenerate: BTreeSet::new(),
            warnings: Vec::new(),
        }
    }

    /// Every event independent; used by the mean-only ablation.
    pub fn empty(events: &[EventId]) -> Self {
        let blankets = events.iter().map(|&e| (e, BTreeSet::new())).collect();
        Self {
            algorithm: "none".to_string(),
            alpha: 0.0,
            max_cond: 0,
            symmetry: Some(SymmetryRule::And),
            blankets,
            degenerate: BTreeSet::new(),
            warnings: Vec::new(),
        }
    }

    pub fn blanket(&self, e: EventId) -> Option<&BTreeSet<EventId>> {
        self.blankets.get(&e)
    }

    pub fn blankets(&self) -> &BTreeMap<EventId, BTreeSet<EventId>> {
        &self.blankets
    }

    pub fn events(&self) -> impl Iterator<Item = EventId> + '_ {
        self.blankets.keys().copied()
    }

    pub fn is_symmetric(&self) -> bool {
        self.blankets
            .iter()
            .all(|(i, s)| s.iter().all(|j| self.blankets.get(j).is_some_and(|t| t.contains(i))))
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        jsonl::write_record(
            out,
            &MbHeader {
                kind: "markov_blankets".into(),
                algorithm: self.algorithm.clone(),
                alpha: self.alpha,
                max_cond: self.max_cond,
                symmetry: self.symmetry,
            },
        )?;
        for (e, related) in &self.blankets {
            jsonl::write_record(
                out,
                &MbRecord {
                    event_id: *e,
                    related: related.iter().copied().collect(),
                    degenerate: self.degenerate.contains(e),
                },
            )?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let (h, records): (MbHeader, Vec<MbRecord>) = jsonl::read_all(reader, origin)?;
        let mut map = MarkovBlanketMap::from_blankets(
            records
                .iter()
                .map(|r| (r.event_id, r.related.iter().copied().collect()))
                .collect(),
            h.alpha,
            h.max_cond,
            h.symmetry,
        );
        map.algorithm = h.algorithm;
        map.degenerate = records.iter().filter(|r| r.degenerate).map(|r| r.event_id).collect();
        Ok(map)
    }
}

#[derive(Serialize, Deserialize)]
struct MbHeader {
    kind: String,
    algorithm: String,
    alpha: f64,
    max_cond: usize,
    symmetry: Option<SymmetryRule>,
}

#[derive(Serialize, Deserialize)]
struct MbRecord {
    event_id: EventId,
    related: Vec<EventId>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    degenerate: bool,
}

/// Raw (uncorrected) blankets of every column of `x`. Per-event searches
/// share one correlation matrix; the parallel path returns exactly what the
/// sequential one does.
pub fn discover_all<T: Scalar>(x: &EventCountMatrix, params: &MbParams, parallel: bool) -> Result<MarkovBlanketMap> {
    params.validate()?;
    let corr = CorrelationMatrix::<T>::from_ecm(x);
    let search = |j: usize| discover_mb(&corr, j, params.alpha, params.max_cond);
    let results: Vec<BlanketSearch> = if parallel {
        (0..x.n_cols()).into_par_iter().map(search).collect()
    } else {
        (0..x.n_cols()).map(search).collect()
    };
    let ids = x.event_ids();
    let mut map = MarkovBlanketMap::from_blankets(
        results
            .iter()
            .enumerate()
            .map(|(j, r)| (ids[j], r.members.iter().map(|&c| ids[c]).collect()))
            .collect(),
        params.alpha,
        params.max_cond,
        None,
    );
    for (j, r) in results.into_iter().enumerate() {
        if r.degenerate {
            map.degenerate.insert(ids[j]);
        }
        if let Some(w) = r.warning {
            map.warnings.push(format!("{}: {w}", ids[j]));
        }
    }
    Ok(map)
}

pub fn symmetry_correct(raw: &MarkovBlanketMap, rule: SymmetryRule) -> MarkovBlanketMap {
    let b = &raw.blankets;
    let corrected: BTreeMap<EventId, BTreeSet<EventId>> = match rule {
        SymmetryRule::And => b
            .iter()
            .map(|(i, s)| {
                let kept = s
                    .iter()
                    .copied()
                    .filter(|j| b.get(j).is_some_and(|t| t.contains(i)))
                    .collect();
                (*i, kept)
            })
            .collect(),
        SymmetryRule::Or => {
            let mut out = b.clone();
            for (i, s) in b {
                for j in s {
                    out.entry(*j).or_default().insert(*i);
                }
            }
            out
        }
    };
    let mut map = MarkovBlanketMap::from_blankets(corrected, raw.alpha, raw.max_cond, Some(rule));
    map.algorithm = raw.algorithm.clone();
    map.degenerate = raw.degenerate.clone();
    map.warnings = raw.warnings.clone();
    map
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventClassification {
    pub dependent: BTreeSet<EventId>,
    pub independent: BTreeSet<EventId>,
}

impl EventClassification {
    pub fn is_dependent(&self, e: EventId) -> bool {
        self.dependent.contains(&e)
    }
}

/// Events with a non-empty blanket are dependent, the rest independent.
pub fn classify_events(mbs: &MarkovBlanketMap) -> EventClassification {
    let mut c = EventClassification::default();
    for (e, s) in mbs.blankets() {
        if s.is_empty() {
            c.independent.insert(*e);
        } else {
            c.dependent.insert(*e);
        }
    }
    c
}
