use std::io::{BufRead, Write};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::drain::{similarity, PrefixTree};
use super::header::HeaderFormat;
use super::mask::{tokenize, MaskRule, Masker, WILDCARD};
use crate::error::{Error, Result};
use crate::event::{EventId, Label};
use crate::fingerprint::fingerprint;
use crate::jsonl;

/// Tokens of the catch-all template that collects header-mismatched lines.
pub const CATCH_ALL_TOKEN: &str = "<malformed>";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    pub depth: usize,
    pub similarity: f64,
    pub max_children: usize,
    pub masks: Vec<MaskRule>,
    pub header: HeaderFormat,
    /// Session identifier pattern; capture group 1 is used when present.
    pub session_pattern: Option<String>,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            similarity: 0.4,
            max_children: 100,
            masks: MaskRule::defaults(),
            header: HeaderFormat::raw(),
            session_pattern: Some(r"blk_-?\d+".into()),
        }
    }
}

impl ParserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!("parser depth must be >= 2, got {}", self.depth)));
        }
        if !(self.similarity > 0.0 && self.similarity < 1.0) {
            return Err(Error::Config(format!(
                "similarity threshold must lie in (0, 1), got {}",
                self.similarity
            )));
        }
        if self.max_children < 2 {
            return Err(Error::Config("max_children must be >= 2".into()));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(self)
    }
}

/// One input line after header stripping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawLogLine {
    pub line_no: u64,
    pub timestamp: Option<i64>,
    pub content: String,
    pub label: Option<Label>,
    /// `false` when the dataset header pattern did not match; such lines go
    /// to the catch-all template.
    pub header_matched: bool,
}

impl RawLogLine {
    pub fn new(line_no: u64, content: impl Into<String>) -> Self {
        Self {
            line_no,
            timestamp: None,
            content: content.into(),
            label: None,
            header_matched: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedMessage {
    pub line_no: u64,
    pub template_id: EventId,
    pub timestamp: Option<i64>,
    pub session_key: Option<String>,
    pub label: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogTemplate {
    pub template_id: EventId,
    pub tokens: Vec<String>,
    pub occurrence_count: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub catch_all: bool,
    /// Prefix-tree keys under the length node.
    #[serde(default)]
    pub route: Vec<String>,
}

impl LogTemplate {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Serialize, Deserialize)]
struct StoreHeader {
    kind: String,
    fingerprint: String,
    config: ParserConfig,
}

/// Mined templates plus the prefix tree used to match new lines.
#[derive(Clone, Debug)]
pub struct TemplateStore {
    config: ParserConfig,
    fingerprint: String,
    templates: Vec<LogTemplate>,
    catch_all: Option<EventId>,
    tree: PrefixTree,
    masker: Masker,
    session: Option<Regex>,
}

impl TemplateStore {
    pub fn new(config: ParserConfig) -> Result<Self> {
        config.validate()?;
        let masker = Masker::new(&config.masks)?;
        let session = config.session_pattern.as_deref().map(Regex::new).transpose()?;
        Ok(Self {
            fingerprint: config.fingerprint(),
            tree: PrefixTree::new(config.depth, config.max_children),
            templates: Vec::new(),
            catch_all: None,
            masker,
            session,
            config,
        })
    }

    pub fn config(&self) -> &ParserConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn templates(&self) -> &[LogTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn template(&self, id: EventId) -> Option<&LogTemplate> {
        self.templates.get(id.index())
    }

    pub fn catch_all(&self) -> Option<EventId> {
        self.catch_all
    }

    /// ECM column vocabulary: every template id, then the unseen sentinel.
    pub fn vocabulary(&self) -> Vec<EventId> {
        (0..self.templates.len() as u32)
            .map(EventId)
            .chain(std::iter::once(EventId::UNSEEN))
            .collect()
    }

    pub fn session_key(&self, content: &str) -> Option<String> {
        let re = self.session.as_ref()?;
        let caps = re.captures(content)?;
        let m = caps.get(1).or_else(|| caps.get(0))?;
        Some(m.as_str().to_string())
    }

    pub fn masker(&self) -> &Masker {
        &self.masker
    }

    fn best_match(&self, masked: &[String]) -> Option<usize> {
        let mut best: Option<(usize, f64, usize)> = None;
        for &idx in self.tree.candidates(masked) {
            let (sim, params) = similarity(&self.templates[idx].tokens, masked);
            let better = match best {
                None => true,
                Some((_, bs, bp)) => sim > bs || (sim == bs && params > bp),
            };
            if better {
                best = Some((idx, sim, params));
            }
        }
        best.filter(|&(_, sim, _)| sim >= self.config.similarity)
            .map(|(idx, _, _)| idx)
    }

    fn message(&self, line: &RawLogLine, template_id: EventId) -> ParsedMessage {
        ParsedMessage {
            line_no: line.line_no,
            template_id,
            timestamp: line.timestamp,
            session_key: self.session_key(&line.content),
            label: line.label,
        }
    }

    fn catch_all_mut(&mut self) -> EventId {
        if let Some(id) = self.catch_all {
            return id;
        }
        let id = EventId(self.templates.len() as u32);
        self.templates.push(LogTemplate {
            template_id: id,
            tokens: vec![CATCH_ALL_TOKEN.to_string()],
            occurrence_count: 0,
            catch_all: true,
            route: Vec::new(),
        });
        self.catch_all = Some(id);
        id
    }

    /// Assigns `line` to a template, creating or generalizing templates as
    /// needed. Order-sensitive; there is a single writer.
    pub fn learn(&mut self, line: &RawLogLine) -> ParsedMessage {
        if !line.header_matched {
            let id = self.catch_all_mut();
            self.templates[id.index()].occurrence_count += 1;
            return self.message(line, id);
        }
        let masked = self.masker.mask_tokens(&tokenize(&line.content));
        let idx = match self.best_match(&masked) {
            Some(idx) => {
                let template = &mut self.templates[idx];
                for (slot, token) in template.tokens.iter_mut().zip(&masked) {
                    if slot != token && slot != WILDCARD {
                        *slot = WILDCARD.to_string();
                    }
                }
                template.occurrence_count += 1;
                idx
            }
            None => {
                let idx = self.templates.len();
                let route = self.tree.insert(&masked, idx);
                self.templates.push(LogTemplate {
                    template_id: EventId(idx as u32),
                    tokens: masked,
                    occurrence_count: 1,
                    catch_all: false,
                    route,
                });
                idx
            }
        };
        self.message(line, EventId(idx as u32))
    }

    /// Matches `line` against the frozen store. Lines that fit no template
    /// get [`EventId::UNSEEN`].
    pub fn parse_line(&self, line: &RawLogLine, config: &ParserConfig) -> Result<ParsedMessage> {
        let found = config.fingerprint();
        if found != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                found,
            });
        }
        Ok(self.match_line(line))
    }

    /// [`parse_line`](Self::parse_line) without the configuration check.
    pub fn match_line(&self, line: &RawLogLine) -> ParsedMessage {
        let id = if !line.header_matched {
            self.catch_all.unwrap_or(EventId::UNSEEN)
        } else {
            let masked = self.masker.mask_tokens(&tokenize(&line.content));
            self.best_match(&masked)
                .map_or(EventId::UNSEEN, |idx| EventId(idx as u32))
        };
        self.message(line, id)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        jsonl::write_record(
            out,
            &StoreHeader {
                kind: "template_store".into(),
                fingerprint: self.fingerprint.clone(),
                config: self.config.clone(),
            },
        )?;
        for t in &self.templates {
            jsonl::write_record(out, t)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let (header, templates): (StoreHeader, Vec<LogTemplate>) = jsonl::read_all(reader, origin)?;
        let mut store = TemplateStore::new(header.config)?;
        if store.fingerprint != header.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: header.fingerprint,
                found: store.fingerprint,
            });
        }
        for (idx, t) in templates.into_iter().enumerate() {
            if t.template_id.index() != idx {
                return Err(Error::Format {
                    path: origin.to_string(),
                    line: idx + 2,
                    message: format!("template ids must be contiguous, found {}", t.template_id),
                });
            }
            if t.catch_all {
                store.catch_all = Some(t.template_id);
            } else {
                store.tree.insert_at(t.tokens.len(), &t.route, idx);
            }
            store.templates.push(t);
        }
        Ok(store)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub lines: u64,
    pub catch_all: u64,
    pub templates: usize,
}

/// Mines templates from `lines` in order and assigns each line to one.
pub fn fit_templates<I>(lines: I, config: &ParserConfig) -> Result<(TemplateStore, Vec<ParsedMessage>, FitDiagnostics)>
where
    I: IntoIterator,
    I::Item: std::borrow::Borrow<RawLogLine>,
{
    use std::borrow::Borrow;
    let mut store = TemplateStore::new(config.clone())?;
    let mut messages = Vec::new();
    let mut diag = FitDiagnostics::default();
    for line in lines {
        let line = line.borrow();
        diag.lines += 1;
        if !line.header_matched {
            diag.catch_all += 1;
        }
        messages.push(store.learn(line));
    }
    diag.templates = store.len();
    Ok((store, messages, diag))
}

#[derive(Serialize, Deserialize)]
struct MessagesHeader {
    kind: String,
    fingerprint: String,
}

pub fn write_messages<W: Write>(out: &mut W, fingerprint: &str, messages: &[ParsedMessage]) -> Result<()> {
    jsonl::write_record(
        out,
        &MessagesHeader {
            kind: "parsed_messages".into(),
            fingerprint: fingerprint.to_string(),
        },
    )?;
    for m in messages {
        jsonl::write_record(out, m)?;
    }
    Ok(())
}

/// Returns the parser fingerprint recorded in the header and the messages.
pub fn read_messages<R: BufRead>(reader: R, origin: &str) -> Result<(String, Vec<ParsedMessage>)> {
    let (header, body): (MessagesHeader, _) = jsonl::read_all(reader, origin)?;
    Ok((header.fingerprint, body))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(texts: &[&str]) -> Vec<RawLogLine> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| RawLogLine::new(i as u64 + 1, *t))
            .collect()
    }

    fn fit(texts: &[&str]) -> (TemplateStore, Vec<ParsedMessage>) {
        let (s, m, _) = fit_templates(lines(texts), &ParserConfig::default()).unwrap();
        (s, m)
    }

    #[test]
    fn numeric_difference_collapses_into_one_template() {
        let (store, msgs) = fit(&["PacketResponder 1 terminating", "PacketResponder 2 terminating"]);
        assert_eq!(store.len(), 1);
        assert_eq!(msgs[0].template_id, msgs[1].template_id);
        let t = &store.templates()[0];
        assert_eq!(t.tokens.iter().filter(|t| *t == WILDCARD).count(), 1);
        assert_eq!(t.occurrence_count, 2);
    }

    #[test]
    fn different_lengths_make_distinct_templates() {
        let (store, msgs) = fit(&["served block x", "served block x to client"]);
        assert_eq!(store.len(), 2);
        assert_ne!(msgs[0].template_id, msgs[1].template_id);
    }

    #[test]
    fn similar_lines_generalize_below_threshold_split() {
        let (store, _) = fit(&[
            "Verification succeeded for a",
            "Verification succeeded for b",
            "Verification failed badly now",
        ]);
        assert_eq!(store.len(), 2);
        assert_eq!(store.templates()[0].text(), "Verification succeeded for <*>");
    }

    #[test]
    fn empty_input_gives_empty_store() {
        let (store, msgs) = fit(&[]);
        assert!(store.is_empty());
        assert!(msgs.is_empty());
        assert_eq!(store.vocabulary(), vec![EventId::UNSEEN]);
    }

    #[test]
    fn malformed_lines_go_to_catch_all() {
        let mut input = lines(&["ok line here", "junk", "ok line there"]);
        input[1].header_matched = false;
        let (store, msgs, diag) = fit_templates(input, &ParserConfig::default()).unwrap();
        assert_eq!(diag.catch_all, 1);
        assert_eq!(store.catch_all(), Some(msgs[1].template_id));
        assert!(store.templates()[msgs[1].template_id.index()].catch_all);
        assert_eq!(msgs[0].template_id, msgs[2].template_id);
    }

    #[test]
    fn frozen_parse_matches_training_and_flags_unseen() {
        let cfg = ParserConfig::default();
        let (store, msgs) = fit(&["Receiving block blk_1 src x", "Deleting block blk_2 file y"]);
        let again = store.parse_line(&RawLogLine::new(9, "Receiving block blk_1 src x"), &cfg).unwrap();
        assert_eq!(again.template_id, msgs[0].template_id);
        let unseen = store.parse_line(&RawLogLine::new(10, "totally new message shape"), &cfg).unwrap();
        assert_eq!(unseen.template_id, EventId::UNSEEN);
        // frozen parsing never changes counts
        assert_eq!(store.templates()[0].occurrence_count, 1);
    }

    #[test]
    fn fingerprint_mismatch_is_an_error() {
        let (store, _) = fit(&["a b c"]);
        let other = ParserConfig {
            similarity: 0.5,
            ..ParserConfig::default()
        };
        assert!(matches!(
            store.parse_line(&RawLogLine::new(1, "a b c"), &other),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn session_key_extraction() {
        let (store, msgs) = fit(&["Receiving block blk_-160899 src: /10.0.0.1:50010"]);
        assert_eq!(msgs[0].session_key.as_deref(), Some("blk_-160899"));
        assert_eq!(store.session_key("no id here"), None);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            ParserConfig { depth: 1, ..ParserConfig::default() },
            ParserConfig { similarity: 1.0, ..ParserConfig::default() },
            ParserConfig { similarity: 0.0, ..ParserConfig::default() },
        ] {
            assert!(matches!(TemplateStore::new(cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn serialization_round_trips_and_matching_survives() {
        let (store, _) = fit(&[
            "Receiving block blk_1 src a",
            "Receiving block blk_2 src b",
            "PacketResponder 0 for block blk_1 terminating",
        ]);
        let mut buf = Vec::new();
        store.write_to(&mut buf).unwrap();
        let back = TemplateStore::read_from(buf.as_slice(), "mem").unwrap();
        let mut buf2 = Vec::new();
        back.write_to(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        let line = RawLogLine::new(1, "PacketResponder 2 for block blk_9 terminating");
        assert_eq!(back.match_line(&line).template_id, store.match_line(&line).template_id);
    }
}
