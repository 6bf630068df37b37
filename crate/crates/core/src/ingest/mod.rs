//! Log parsing: header stripping, token masking and template mining.

mod drain;
pub mod header;
pub mod mask;
pub mod store;

use std::io::BufRead;

use serde::{Deserialize, Serialize};

pub use header::{HeaderFormat, HeaderParser, Stripped};
pub use mask::{MaskRule, Masker, WILDCARD};
pub use store::{
    fit_templates, read_messages, write_messages, FitDiagnostics, LogTemplate, ParsedMessage, ParserConfig,
    RawLogLine, TemplateStore, CATCH_ALL_TOKEN,
};

use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadDiagnostics {
    pub total_lines: u64,
    pub skipped_empty: u64,
    pub malformed: u64,
}

/// Reads a plain-text log, one message per line. Blank lines (or lines whose
/// content is empty after the header) are skipped and counted; lines that do
/// not match the header pattern are kept and flagged.
pub fn read_log_lines<R: BufRead>(reader: R, header: &HeaderParser) -> Result<(Vec<RawLogLine>, ReadDiagnostics)> {
    let mut out = Vec::new();
    let mut diag = ReadDiagnostics::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx as u64 + 1;
        diag.total_lines += 1;
        match header.strip(&line) {
            Stripped::Empty => diag.skipped_empty += 1,
            Stripped::Malformed(content) => {
                diag.malformed += 1;
                out.push(RawLogLine {
                    line_no,
                    timestamp: None,
                    content,
                    label: None,
                    header_matched: false,
                });
            }
            Stripped::Parsed {
                content,
                timestamp,
                label,
            } => out.push(RawLogLine {
                line_no,
                timestamp,
                content,
                label,
                header_matched: true,
            }),
        }
    }
    Ok((out, diag))
}
