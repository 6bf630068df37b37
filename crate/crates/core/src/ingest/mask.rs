use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Placeholder for a variable token.
pub const WILDCARD: &str = "<*>";

/// A whole-token masking rule. A token is masked when the pattern matches the
/// entire token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRule {
    pub name: String,
    pub pattern: String,
}

impl MaskRule {
    pub fn new(name: &str, pattern: &str) -> Self {
        Self {
            name: name.to_string(),
            pattern: pattern.to_string(),
        }
    }

    /// Block ids, IPv4 addresses (optionally with a leading slash and a port),
    /// hexadecimal strings and plain numbers.
    pub fn defaults() -> Vec<MaskRule> {
        vec![
            MaskRule::new("block_id", r"blk_-?\d+"),
            MaskRule::new("ipv4", r"/?(?:\d{1,3}\.){3}\d{1,3}(?::\d+)?"),
            MaskRule::new(
                "hex",
                r"0[xX][0-9a-fA-F]+|[0-9a-fA-F]*[0-9][0-9a-fA-F]*[a-fA-F][0-9a-fA-F]*|[0-9a-fA-F]*[a-fA-F][0-9a-fA-F]*[0-9][0-9a-fA-F]*",
            ),
            MaskRule::new("number", r"[-+]?\d+(?:\.\d+)?"),
        ]
    }
}

/// Compiled set of [`MaskRule`]s.
#[derive(Clone, Debug)]
pub struct Masker {
    rules: Vec<Regex>,
}

impl Masker {
    pub fn new(rules: &[MaskRule]) -> Result<Self> {
        let rules = rules
            .iter()
            .map(|r| Regex::new(&format!("^(?:{})$", r.pattern)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rules })
    }

    pub fn is_variable(&self, token: &str) -> bool {
        self.rules.iter().any(|r| r.is_match(token))
    }

    /// Replaces every token matched by a rule with [`WILDCARD`]. The output
    /// has the same length as the input.
    pub fn mask_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                if self.is_variable(t) {
                    WILDCARD.to_string()
                } else {
                    t.to_string()
                }
            })
            .collect()
    }
}

/// Whitespace tokenization used for template mining.
pub fn tokenize(content: &str) -> Vec<&str> {
    content.split_whitespace().collect()
}
