use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Label;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degenerate {
    /// No positive predictions, precision reported as 0.
    pub precision: bool,
    /// No positive labels, recall reported as 0.
    pub recall: bool,
    /// Precision and recall both 0, F1 reported as 0.
    pub f1: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: Degenerate,
}

impl MetricsReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let mut degenerate = Degenerate::default();
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            degenerate.precision = true;
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            degenerate.recall = true;
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate.f1 = true;
            0.0
        };
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            degenerate,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sequences  {}", self.total())?;
        writeln!(f, "tp {}  fp {}  fn {}  tn {}", self.tp, self.fp, self.fn_, self.tn)?;
        let mark = |d: bool| if d { " (undefined)" } else { "" };
        writeln!(f, "precision  {:.4}{}", self.precision, mark(self.degenerate.precision))?;
        writeln!(f, "recall     {:.4}{}", self.recall, mark(self.degenerate.recall))?;
        write!(f, "f1         {:.4}{}", self.f1, mark(self.degenerate.f1))
    }
}

/// Confusion counts of `predicted` against `truth`, which must list the
/// same sequence ids in the same order.
pub fn evaluate<P: AsRef<str>, Q: AsRef<str>>(predicted: &[(P, bool)], truth: &[(Q, Label)]) -> Result<MetricsReport> {
    let n = predicted.len().max(truth.len());
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for i in 0..n {
        let (p, t) = match (predicted.get(i), truth.get(i)) {
            (Some(p), Some(t)) if p.0.as_ref() == t.0.as_ref() => (p.1, t.1.is_anomalous()),
            (p, t) => {
                return Err(Error::IdMismatch {
                    index: i,
                    verdict: p.map(|p| p.0.as_ref().to_string()),
                    label: t.map(|t| t.0.as_ref().to_string()),
                })
            }
        };
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}
