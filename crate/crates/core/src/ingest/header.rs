//! Per-dataset header stripping.

use chrono::NaiveDateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::Label;

/// How to split a raw line into header fields and message content.
///
/// `pattern` must define a `content` group and may define `ts` (timestamp
/// text, parsed with `timestamp_format`; `%s` means epoch seconds) and
/// `label` (per-line ground truth; the value equal to `normal_label` is
/// normal, anything else anomalous). Without a pattern the whole line is the
/// content.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderFormat {
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default)]
    pub timestamp_format: Option<String>,
    #[serde(default)]
    pub normal_label: Option<String>,
}

impl HeaderFormat {
    pub fn raw() -> Self {
        Self {
            pattern: None,
            timestamp_format: None,
            normal_label: None,
        }
    }

    /// `081109 203615 148 INFO dfs.DataNode$PacketResponder: PacketResponder 1 ...`
    pub fn hdfs() -> Self {
        Self {
            pattern: Some(
                r"^(?P<ts>\d{6} \d{6}) (?P<pid>\d+) (?P<level>[A-Z]+) (?P<component>\S+?): (?P<content>.*)$"
                    .into(),
            ),
            timestamp_format: Some("%y%m%d %H%M%S".into()),
            normal_label: None,
        }
    }

    /// `- 1117838570 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.42.50.675872 R02-M1-N0-C:J12-U11 RAS KERNEL INFO ...`
    pub fn bgl() -> Self {
        Self {
            pattern: Some(
                r"^(?P<label>\S+) (?P<ts>\d+) (?P<date>\S+) (?P<node>\S+) (?P<time>\S+) (?P<noderepeat>\S+) (?P<kind>\S+) (?P<component>\S+) (?P<level>\S+) (?P<content>.*)$"
                    .into(),
            ),
            timestamp_format: Some("%s".into()),
            normal_label: Some("-".into()),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "raw" => Some(Self::raw()),
            "hdfs" => Some(Self::hdfs()),
            "bgl" => Some(Self::bgl()),
            _ => None,
        }
    }
}

/// Result of stripping one line's header.
#[derive(Clone, Debug, PartialEq)]
pub enum Stripped {
    Parsed {
        content: String,
        timestamp: Option<i64>,
        label: Option<Label>,
    },
    /// The header pattern did not match; the trimmed line is kept as content.
    Malformed(String),
    Empty,
}

#[derive(Clone, Debug)]
pub struct HeaderParser {
    re: Option<Regex>,
    timestamp_format: Option<String>,
    normal_label: Option<String>,
}

impl HeaderParser {
    pub fn new(format: &HeaderFormat) -> Result<Self> {
        let re = match &format.pattern {
            Some(p) => {
                let re = Regex::new(p)?;
                if !re.capture_names().flatten().any(|n| n == "content") {
                    return Err(Error::Config("header pattern needs a `content` group".into()));
                }
                Some(re)
            }
            None => None,
        };
        Ok(Self {
            re,
            timestamp_format: format.timestamp_format.clone(),
            normal_label: format.normal_label.clone(),
        })
    }

    pub fn strip(&self, line: &str) -> Stripped {
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            return Stripped::Empty;
        }
        let Some(re) = &self.re else {
            return Stripped::Parsed {
                content: line.trim().to_string(),
                timestamp: None,
                label: None,
            };
        };
        let Some(caps) = re.captures(line) else {
            return Stripped::Malformed(line.trim().to_string());
        };
        let content = caps.name("content").map_or("", |m| m.as_str()).trim();
        if content.is_empty() {
            return Stripped::Empty;
        }
        let timestamp = caps
            .name("ts")
            .and_then(|m| self.parse_timestamp(m.as_str()));
        let label = caps.name("label").map(|m| match &self.normal_label {
            Some(normal) if m.as_str() == normal => Label::Normal,
            Some(_) => Label::Anomalous,
            None => Label::parse(m.as_str()).unwrap_or(Label::Anomalous),
        });
        Stripped::Parsed {
            content: content.to_string(),
            timestamp,
            label,
        }
    }

    fn parse_timestamp(&self, text: &str) -> Option<i64> {
        match self.timestamp_format.as_deref() {
            None | Some("%s") => text.trim().parse().ok(),
            Some(fmt) => NaiveDateTime::parse_from_str(text.trim(), fmt)
                .ok()
                .map(|t| t.and_utc().timestamp()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hdfs_header() {
        let p = HeaderParser::new(&HeaderFormat::hdfs()).unwrap();
        let s = p.strip("081109 203615 148 INFO dfs.DataNode$PacketResponder: PacketResponder 1 for block blk_38865049064139660 terminating");
        match s {
            Stripped::Parsed { content, timestamp, label } => {
                assert_eq!(content, "PacketResponder 1 for block blk_38865049064139660 terminating");
                // 2008-11-09 20:36:15 UTC
                assert_eq!(timestamp, Some(1_226_262_975));
                assert_eq!(label, None);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bgl_header_and_labels() {
        let p = HeaderParser::new(&HeaderFormat::bgl()).unwrap();
        let normal = p.strip("- 1117838570 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.42.50.675872 R02-M1-N0-C:J12-U11 RAS KERNEL INFO instruction cache parity error corrected");
        let alert = p.strip("KERNDTLB 1118536327 2005.06.11 R30-M0-N9-C:J16-U01 2005-06-11-17.32.07.581048 R30-M0-N9-C:J16-U01 RAS KERNEL FATAL data TLB error interrupt");
        assert!(matches!(normal, Stripped::Parsed { label: Some(Label::Normal), timestamp: Some(1117838570), .. }));
        match alert {
            Stripped::Parsed { content, label, .. } => {
                assert_eq!(content, "data TLB error interrupt");
                assert_eq!(label, Some(Label::Anomalous));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_and_empty() {
        let p = HeaderParser::new(&HeaderFormat::hdfs()).unwrap();
        assert_eq!(p.strip("   "), Stripped::Empty);
        assert_eq!(p.strip("garbage line"), Stripped::Malformed("garbage line".into()));
        let raw = HeaderParser::new(&HeaderFormat::raw()).unwrap();
        assert!(matches!(raw.strip("  hello world "), Stripped::Parsed { ref content, .. } if content == "hello world"));
    }

    #[test]
    fn pattern_without_content_group_rejected() {
        let f = HeaderFormat {
            pattern: Some("^(?P<x>.*)$".into()),
            ..HeaderFormat::raw()
        };
        assert!(HeaderParser::new(&f).is_err());
    }
}
