use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use logdp::detector::{count_anomalies, detect_batch, read_verdicts, write_verdicts};
use logdp::evaluation::datasets::{read_label_csv, LabelTable};
use logdp::evaluation::hdfs_like::{generate_hdfs_like, HdfsLikeSpec};
use logdp::evaluation::synthetic::SyntheticLabel;
use logdp::evaluation::{evaluate as score, generate_synthetic, MetricsReport, SyntheticSpec};
use logdp::ingest::{
    fit_templates, read_log_lines, read_messages, write_messages, FitDiagnostics, HeaderParser, ParsedMessage,
    ReadDiagnostics, TemplateStore,
};
use logdp::pipeline::{holdout_split, log_matrix, train as train_bundle, MatrixReport, TrainReport};
use logdp::sequencer::split_train_val;
use logdp::{jsonl, EventCountMatrix, EventId, Label, ModelBundle, RunConfig};

use crate::settings::{self, Overrides};

fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| cfg.paths.output_dir.clone())
        .context("no output directory: pass --out or set paths.output_dir")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_jsonl(path: &Path, write: impl FnOnce(&mut fs::File) -> logdp::Result<()>) -> Result<()> {
    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write(&mut file)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_store(path: &Path) -> Result<TemplateStore> {
    Ok(TemplateStore::read_from(jsonl::open(path)?, &path.display().to_string())?)
}

fn read_ecm(path: &Path) -> Result<EventCountMatrix> {
    Ok(EventCountMatrix::read_from(jsonl::open(path)?, &path.display().to_string())?)
}

fn read_parsed(path: &Path, store: &TemplateStore) -> Result<Vec<ParsedMessage>> {
    let (fingerprint, messages) = read_messages(jsonl::open(path)?, &path.display().to_string())?;
    if fingerprint != store.fingerprint() {
        return Err(logdp::Error::FingerprintMismatch {
            expected: store.fingerprint().to_string(),
            found: fingerprint,
        })
        .with_context(|| format!("{} was parsed with a different parser configuration", path.display()));
    }
    Ok(messages)
}

fn read_table(path: &Path) -> Result<LabelTable> {
    Ok(read_label_csv(jsonl::open(path)?, &path.display().to_string())?)
}

#[derive(Serialize)]
struct ParseDiagnostics {
    config_fingerprint: String,
    read: ReadDiagnostics,
    fit: FitDiagnostics,
    /// Lines matching no template of a frozen store.
    unseen: u64,
}

pub fn parse(input: Option<PathBuf>, templates: Option<PathBuf>, out: Option<PathBuf>, o: &Overrides) -> Result<()> {
    let cfg = settings::load(o)?;
    let input = input
        .or_else(|| cfg.paths.input.clone())
        .context("no input log: pass --input or set paths.input")?;
    let reader = jsonl::open(&input)?;
    let out = output_dir(out, &cfg)?;
    let header = HeaderParser::new(&cfg.parser.header)?;
    let (lines, read) = read_log_lines(reader, &header)?;

    let (store, messages, fit) = match &templates {
        Some(path) => {
            let store = read_store(path)?;
            let found = cfg.parser.fingerprint();
            if found != store.fingerprint() {
                return Err(logdp::Error::FingerprintMismatch {
                    expected: store.fingerprint().to_string(),
                    found,
                })
                .with_context(|| format!("parser settings differ from those of {}", path.display()));
            }
            let messages: Vec<ParsedMessage> = lines.iter().map(|l| store.match_line(l)).collect();
            let fit = FitDiagnostics {
                lines: lines.len() as u64,
                catch_all: lines.iter().filter(|l| !l.header_matched).count() as u64,
                templates: store.len(),
            };
            (store, messages, fit)
        }
        None => fit_templates(&lines, &cfg.parser)?,
    };
    let unseen = messages.iter().filter(|m| m.template_id == EventId::UNSEEN).count() as u64;

    write_jsonl(&out.join("templates.jsonl"), |f| store.write_to(f))?;
    write_jsonl(&out.join("messages.jsonl"), |f| write_messages(f, store.fingerprint(), &messages))?;
    write_json(
        &out.join("parse_diagnostics.json"),
        &ParseDiagnostics {
            config_fingerprint: cfg.fingerprint(),
            read: read.clone(),
            fit: fit.clone(),
            unseen,
        },
    )?;
    println!(
        "parsed {} lines into {} templates ({} skipped empty, {} catch-all, {} unseen) -> {}",
        fit.lines,
        store.len(),
        read.skipped_empty,
        fit.catch_all,
        unseen,
        out.display()
    );
    Ok(())
}

pub struct TrainArgs {
    pub messages: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub ecm: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub holdout_fraction: Option<f64>,
    pub drop_anomalous: bool,
    pub out: Option<PathBuf>,
    pub overrides: Overrides,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    config_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<MatrixReport>,
    test_rows: usize,
    dropped_anomalous: usize,
    #[serde(flatten)]
    report: &'a TrainReport,
}

pub fn train(args: TrainArgs) -> Result<()> {
    let cfg = settings::load(&args.overrides)?;
    let (x, matrix) = match (&args.ecm, &args.messages, &args.templates) {
        (Some(path), _, _) => (read_ecm(path)?, None),
        (None, Some(messages), Some(templates)) => {
            let store = read_store(templates)?;
            let parsed = read_parsed(messages, &store)?;
            let table = args.labels.as_deref().map(read_table).transpose()?;
            let (x, report) = log_matrix(&store, &parsed, &cfg.window, table.as_ref())?;
            (x, Some(report))
        }
        _ => anyhow::bail!("train needs --ecm, or --messages with --templates"),
    };
    let out = output_dir(args.out, &cfg)?;

    let (pool, test) = match args.holdout_fraction {
        Some(f) => {
            let (pool, test) = holdout_split(&x, f)?;
            (pool, Some(test))
        }
        None => (x, None),
    };
    let mut dropped = 0;
    let pool = if args.drop_anomalous {
        let clean = pool.normal_rows();
        dropped = pool.n_rows() - clean.n_rows();
        clean
    } else {
        pool
    };
    let (train_x, val_x) = match &args.val {
        Some(path) => (pool, read_ecm(path)?),
        None => split_train_val(&pool, cfg.split_ratio.0)?,
    };

    let (bundle, report) = train_bundle::<f64>(&train_x, &val_x, &cfg.train_options())?;
    write_jsonl(&out.join("bundle.jsonl"), |f| bundle.write_to(f))?;
    write_jsonl(&out.join("train_ecm.jsonl"), |f| train_x.write_to(f))?;
    write_jsonl(&out.join("val_ecm.jsonl"), |f| val_x.write_to(f))?;
    if let Some(test) = &test {
        write_jsonl(&out.join("test_ecm.jsonl"), |f| test.write_to(f))?;
    }
    write_json(
        &out.join("train_report.json"),
        &TrainSummary {
            config_fingerprint: cfg.fingerprint(),
            matrix,
            test_rows: test.as_ref().map_or(0, |t| t.n_rows()),
            dropped_anomalous: dropped,
            report: &report,
        },
    )?;
    println!(
        "trained on {} sequences, calibrated on {}: {} dependency + {} proximity models -> {}",
        report.train_rows,
        report.val_rows,
        report.dependency_models,
        report.proximity_models,
        out.display()
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn detect(
    bundle_path: PathBuf,
    ecm: Option<PathBuf>,
    messages: Option<PathBuf>,
    templates: Option<PathBuf>,
    labels: Option<PathBuf>,
    out: PathBuf,
    o: &Overrides,
) -> Result<()> {
    let cfg = settings::load(o)?;
    let mut bundle = ModelBundle::read_from(jsonl::open(&bundle_path)?, &bundle_path.display().to_string())?;
    if o.margin.is_some() {
        bundle = bundle.with_margin(cfg.margin)?;
    }
    let x = match (ecm, messages, templates) {
        (Some(path), _, _) => read_ecm(&path)?,
        (None, Some(messages), Some(templates)) => {
            let store = read_store(&templates)?;
            let parsed = read_parsed(&messages, &store)?;
            let table = labels.as_deref().map(read_table).transpose()?;
            log_matrix(&store, &parsed, &cfg.window, table.as_ref())?.0
        }
        _ => anyhow::bail!("detect needs --ecm, or --messages with --templates"),
    };
    let verdicts = detect_batch(&x, &bundle, cfg.parallel)
        .with_context(|| format!("scoring against {}", bundle_path.display()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_jsonl(&out, |f| write_verdicts(f, &bundle, &verdicts))?;
    println!(
        "{} sequences scored, {} flagged -> {}",
        verdicts.len(),
        count_anomalies(&verdicts),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MetricsRecord {
    kind: String,
    config_fingerprint: String,
    bundle_hash: String,
    source: String,
    margin: f64,
    #[serde(flatten)]
    metrics: MetricsReport,
}

enum Truth {
    Ordered(Vec<(String, Label)>),
    Table(LabelTable),
}

fn read_truth(path: &Path) -> Result<Truth> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return Ok(Truth::Table(read_table(path)?));
    }
    let mut first = String::new();
    jsonl::open(path)?.read_line(&mut first)?;
    let head: serde_json::Value =
        serde_json::from_str(&first).with_context(|| format!("{}: not a label file", path.display()))?;
    if head.get("event_ids").is_some() {
        let x = read_ecm(path)?;
        return Ok(Truth::Ordered(
            x.sequence_ids().iter().cloned().zip(x.labels().iter().copied()).collect(),
        ));
    }
    let records: Vec<SyntheticLabel> = jsonl::read_records(jsonl::open(path)?, &path.display().to_string())?;
    Ok(Truth::Table(records.into_iter().map(|r| (r.sequence_id, r.label)).collect()))
}

pub fn evaluate(verdicts: PathBuf, labels: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let (header, records) = read_verdicts::<f64, _>(jsonl::open(&verdicts)?, &verdicts.display().to_string())?;
    let predicted: Vec<(String, bool)> = records.into_iter().map(|r| (r.sequence_id, r.is_anomaly)).collect();
    let truth = match read_truth(&labels)? {
        Truth::Ordered(t) => t,
        Truth::Table(table) => predicted
            .iter()
            .enumerate()
            .map(|(index, (id, _))| {
                table.get(id).map(|&l| (id.clone(), l)).ok_or_else(|| logdp::Error::IdMismatch {
                    index,
                    verdict: Some(id.clone()),
                    label: None,
                })
            })
            .collect::<logdp::Result<_>>()?,
    };
    let metrics = score(&predicted, &truth)?;
    println!("{metrics}");
    if let Some(path) = out {
        write_json(
            &path,
            &MetricsRecord {
                kind: "metrics".into(),
                config_fingerprint: header.config_fingerprint,
                bundle_hash: header.bundle_hash,
                source: header.source,
                margin: header.margin,
                metrics,
            },
        )?;
    }
    Ok(())
}

pub fn synth_ecm(spec: Option<PathBuf>, seed: Option<u64>, rate: Option<f64>, out: PathBuf) -> Result<()> {
    let mut spec: SyntheticSpec = match spec {
        Some(path) => serde_json::from_reader(jsonl::open(&path)?).with_context(|| format!("reading {}", path.display()))?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(r) = rate {
        spec.anomaly_rate = r;
    }
    let ds = generate_synthetic(&spec)?;
    fs::create_dir_all(&out)?;
    write_jsonl(&out.join("train_ecm.jsonl"), |f| ds.train.write_to(f))?;
    write_jsonl(&out.join("val_ecm.jsonl"), |f| ds.val.write_to(f))?;
    write_jsonl(&out.join("test_ecm.jsonl"), |f| ds.test.write_to(f))?;
    write_jsonl(&out.join("labels.jsonl"), |f| {
        ds.labels.iter().try_for_each(|l| jsonl::write_record(f, l))
    })?;
    write_json(&out.join("spec.json"), &spec)?;
    let anomalies = ds.labels.iter().filter(|l| l.label.is_anomalous()).count();
    println!(
        "synthetic seed {}: {}/{}/{} rows, {} planted anomalies -> {}",
        spec.seed,
        ds.train.n_rows(),
        ds.val.n_rows(),
        ds.test.n_rows(),
        anomalies,
        out.display()
    );
    Ok(())
}

pub fn synth_logs(seed: Option<u64>, blocks: Option<usize>, rate: Option<f64>, out: PathBuf) -> Result<()> {
    let mut spec = HdfsLikeSpec::default();
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(b) = blocks {
        spec.blocks = b;
    }
    if let Some(r) = rate {
        anyhow::ensure!((0.0..1.0).contains(&r), "anomaly rate must lie in [0, 1)");
        spec.anomaly_rate = r;
    }
    let corpus = generate_hdfs_like(&spec);
    fs::create_dir_all(&out)?;
    let mut log = std::io::BufWriter::new(fs::File::create(out.join("HDFS.log"))?);
    corpus.write_log(&mut log)?;
    log.flush()?;
    let mut labels = std::io::BufWriter::new(fs::File::create(out.join("anomaly_label.csv"))?);
    corpus.write_labels(&mut labels)?;
    labels.flush()?;
    println!(
        "{} lines over {} blocks ({} anomalous) -> {}",
        corpus.lines.len(),
        corpus.labels.len(),
        corpus.faults.len(),
        out.display()
    );
    Ok(())
}

pub fn print_config(o: &Overrides) -> Result<()> {
    let cfg = settings::load(o)?;
    print!("{}", toml::to_string_pretty(&cfg)?);
    println!("# fingerprint {}", cfg.fingerprint());
    Ok(())
}
