//! Run configuration shared by every command.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fingerprint::fingerprint;
use crate::ingest::ParserConfig;
use crate::mb::MbParams;
use crate::pattern::MlpHyperParams;
use crate::pipeline::TrainOptions;
use crate::sequencer::WindowSpec;

/// A fraction in (0, 1), written either as a number or as `"a/b"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio(pub f64);

impl std::str::FromStr for Ratio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let value = match s.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
                let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
                a / b
            }
            None => s.parse().map_err(|_| format!("bad ratio {s:?}"))?,
        };
        if !(value > 0.0 && value < 1.0) {
            return Err(format!("ratio must lie in (0, 1), got {s}"));
        }
        Ok(Ratio(value))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => format!("{v}").parse(),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub parser: ParserConfig,
    pub window: WindowSpec,
    /// Share of the clean training pool used for model fitting; the rest
    /// calibrates thresholds.
    pub split_ratio: Ratio,
    pub mb: MbParams,
    pub mlp: MlpHyperParams,
    pub margin: f64,
    pub seed: u64,
    /// Thread-level parallelism. Results do not depend on it.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            parser: ParserConfig::default(),
            window: WindowSpec::default(),
            split_ratio: Ratio(2.0 / 3.0),
            mb: MbParams::default(),
            mlp: MlpHyperParams::default(),
            margin: 1.0,
            seed: 42,
            parallel: true,
        }
    }
}

#[derive(Serialize)]
struct Canonical<'a> {
    parser: &'a ParserConfig,
    window: &'a WindowSpec,
    split_ratio: Ratio,
    mb: &'a MbParams,
    mlp: &'a MlpHyperParams,
    margin: f64,
    seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.parser.validate()?;
        self.window.validate()?;
        self.mb.validate()?;
        self.mlp.validate()?;
        if !(self.margin >= 1.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be >= 1, got {}", self.margin)));
        }
        Ok(())
    }

    /// Content hash of everything that affects results. Paths and the
    /// parallelism switch are left out so relocated or parallel runs of
    /// the same configuration produce identical artifacts.
    pub fn fingerprint(&self) -> String {
        fingerprint(&Canonical {
            parser: &self.parser,
            window: &self.window,
            split_ratio: self.split_ratio,
            mb: &self.mb,
            mlp: &self.mlp,
            margin: self.margin,
            seed: self.seed,
        })
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            mb: self.mb.clone(),
            mlp: self.mlp.clone(),
            margin: self.margin,
            seed: self.seed,
            parallel: self.parallel,
            force_independent: false,
            config_fingerprint: self.fingerprint(),
        }
    }
}
