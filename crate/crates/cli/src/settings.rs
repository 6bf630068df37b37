//! Config file loading and flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use logdp::config::Ratio;
use logdp::ingest::HeaderFormat;
use logdp::mb::SymmetryRule;
use logdp::pattern::Optimizer;
use logdp::sequencer::WindowUnit;
use logdp::{RunConfig, WindowSpec};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WindowMode {
    Session,
    FixedCount,
    FixedTime,
    Sliding,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Unit {
    Count,
    Seconds,
}

/// Flags that override fields of the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Prefix tree depth.
    #[arg(long, help_heading = "Parser")]
    pub depth: Option<usize>,
    /// Template similarity threshold.
    #[arg(long, help_heading = "Parser")]
    pub similarity: Option<f64>,
    #[arg(long, help_heading = "Parser")]
    pub max_children: Option<usize>,
    /// Header preset: raw, hdfs or bgl.
    #[arg(long, help_heading = "Parser")]
    pub header: Option<String>,
    /// Regex for the session identifier (capture group 1 if present).
    #[arg(long, help_heading = "Parser")]
    pub session_pattern: Option<String>,

    #[arg(long, value_enum, help_heading = "Windowing")]
    pub window: Option<WindowMode>,
    /// Window size in messages or seconds.
    #[arg(long, help_heading = "Windowing")]
    pub window_size: Option<i64>,
    /// Sliding window step.
    #[arg(long, help_heading = "Windowing")]
    pub window_step: Option<i64>,
    #[arg(long, value_enum, help_heading = "Windowing")]
    pub window_unit: Option<Unit>,

    /// Training share of the clean pool, e.g. 2/3.
    #[arg(long, help_heading = "Training")]
    pub split_ratio: Option<Ratio>,
    /// Significance level of the conditional independence tests.
    #[arg(long, help_heading = "Training")]
    pub alpha: Option<f64>,
    /// Largest conditioning set per test.
    #[arg(long, help_heading = "Training")]
    pub max_cond: Option<usize>,
    #[arg(long, help_heading = "Training")]
    pub symmetry: Option<SymmetryRule>,
    #[arg(long, help_heading = "Training")]
    pub hidden: Option<usize>,
    #[arg(long, help_heading = "Training")]
    pub epochs: Option<usize>,
    #[arg(long, help_heading = "Training")]
    pub learning_rate: Option<f64>,
    #[arg(long, help_heading = "Training")]
    pub optimizer: Option<Optimizer>,
    /// Threshold margin factor (>= 1).
    #[arg(long, help_heading = "Training")]
    pub margin: Option<f64>,
    #[arg(long, help_heading = "Training")]
    pub seed: Option<u64>,
    /// Run on one thread.
    #[arg(long)]
    pub sequential: bool,
}

pub fn load(overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &overrides.config {
        Some(path) => read_config(path)?,
        None => RunConfig::default(),
    };
    apply(&mut cfg, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn apply(cfg: &mut RunConfig, o: &Overrides) -> Result<()> {
    let p = &mut cfg.parser;
    if let Some(v) = o.depth {
        p.depth = v;
    }
    if let Some(v) = o.similarity {
        p.similarity = v;
    }
    if let Some(v) = o.max_children {
        p.max_children = v;
    }
    if let Some(name) = &o.header {
        p.header = HeaderFormat::preset(name).with_context(|| format!("unknown header preset {name:?}"))?;
    }
    if let Some(v) = &o.session_pattern {
        p.session_pattern = Some(v.clone());
    }

    if o.window.is_some() || o.window_size.is_some() || o.window_step.is_some() || o.window_unit.is_some() {
        cfg.window = window(&cfg.window, o)?;
    }
    if let Some(v) = o.split_ratio {
        cfg.split_ratio = v;
    }
    if let Some(v) = o.alpha {
        cfg.mb.alpha = v;
    }
    if let Some(v) = o.max_cond {
        cfg.mb.max_cond = v;
    }
    if let Some(v) = o.symmetry {
        cfg.mb.symmetry = v;
    }
    if let Some(v) = o.hidden {
        cfg.mlp.hidden = v;
    }
    if let Some(v) = o.epochs {
        cfg.mlp.epochs = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.mlp.learning_rate = v;
    }
    if let Some(v) = o.optimizer {
        cfg.mlp.optimizer = v;
    }
    if let Some(v) = o.margin {
        cfg.margin = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if o.sequential {
        cfg.parallel = false;
    }
    Ok(())
}

fn window(current: &WindowSpec, o: &Overrides) -> Result<WindowSpec> {
    let mode = match (o.window, current) {
        (Some(m), _) => m,
        (None, WindowSpec::Session) => WindowMode::Session,
        (None, WindowSpec::FixedCount { .. }) => WindowMode::FixedCount,
        (None, WindowSpec::FixedTime { .. }) => WindowMode::FixedTime,
        (None, WindowSpec::Sliding { .. }) => WindowMode::Sliding,
    };
    let size = o.window_size;
    let need = |what: &str| anyhow::anyhow!("--window {mode:?} needs --{what}");
    Ok(match mode {
        WindowMode::Session => WindowSpec::Session,
        WindowMode::FixedCount => WindowSpec::FixedCount {
            size: size.ok_or_else(|| need("window-size"))?.try_into().context("window size")?,
        },
        WindowMode::FixedTime => WindowSpec::FixedTime {
            seconds: size.ok_or_else(|| need("window-size"))?,
        },
        WindowMode::Sliding => {
            let unit = match o.window_unit {
                Some(Unit::Seconds) => WindowUnit::Seconds,
                Some(Unit::Count) | None => WindowUnit::Count,
            };
            let size = size.ok_or_else(|| need("window-size"))?;
            let step = o.window_step.ok_or_else(|| need("window-step"))?;
            if step <= 0 {
                bail!("window step must be positive");
            }
            WindowSpec::Sliding { size, step, unit }
        }
    })
}
