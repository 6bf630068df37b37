//! Library results checked against independent re-computations.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use logdp::detector::detect_batch;
use logdp::evaluation::{generate_synthetic, SyntheticSpec};
use logdp::ingest::mask::tokenize;
use logdp::ingest::{fit_templates, read_log_lines, HeaderFormat, HeaderParser, Masker, ParserConfig, WILDCARD};
use logdp::evaluation::hdfs_like::{generate_hdfs_like, HdfsLikeSpec};
use logdp::mb::{discover_mb, CorrelationMatrix};
use logdp::pipeline::{train, TrainOptions};
use logdp::{EventCountMatrix, EventId, Label};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Expected count per column, evaluated straight from the bundle's JSON.
struct JsonModel {
    event: u64,
    threshold: f64,
    kind: Kind,
}

enum Kind {
    Mean(f64),
    Mlp {
        inputs: Vec<u64>,
        mean: Vec<f64>,
        std: Vec<f64>,
        hidden: usize,
        params: Vec<f64>,
    },
}

fn json_models(bundle_bytes: &[u8]) -> Vec<JsonModel> {
    let text = std::str::from_utf8(bundle_bytes).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let r: Value = serde_json::from_str(line).unwrap();
            let m = &r["model"]["model"];
            let kind = match r["model"]["kind"].as_str().unwrap() {
                "Proximity" => Kind::Mean(m["mean"].as_f64().unwrap()),
                "Dependency" => Kind::Mlp {
                    inputs: m["inputs"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect(),
                    mean: floats(&m["input_mean"]),
                    std: floats(&m["input_std"]),
                    hidden: m["network"]["hidden"].as_u64().unwrap() as usize,
                    params: floats(&m["network"]["params"]),
                },
                other => panic!("unknown model kind {other}"),
            };
            JsonModel {
                event: r["event_id"].as_u64().unwrap(),
                threshold: r["threshold"].as_f64().unwrap(),
                kind,
            }
        })
        .collect()
}

fn expected(model: &JsonModel, row: &BTreeMap<u64, f64>) -> f64 {
    match &model.kind {
        Kind::Mean(mu) => *mu,
        Kind::Mlp {
            inputs,
            mean,
            std,
            hidden,
            params,
        } => {
            let k = inputs.len();
            let z: Vec<f64> = (0..k).map(|i| (row[&inputs[i]] - mean[i]) / std[i]).collect();
            let w2 = &params[hidden * k + hidden..hidden * k + 2 * hidden];
            let mut y = params[hidden * k + 2 * hidden];
            for u in 0..*hidden {
                let mut a = params[hidden * k + u];
                for i in 0..k {
                    a += params[u * k + i] * z[i];
                }
                y += w2[u] * a.tanh();
            }
            y
        }
    }
}

fn check_detector_against_json(train_x: &EventCountMatrix, val_x: &EventCountMatrix, test_x: &EventCountMatrix) {
    let (bundle, _) = train::<f64>(train_x, val_x, &TrainOptions::default()).unwrap();
    let models = json_models(&bundle.to_bytes());
    let verdicts = detect_batch(test_x, &bundle, false).unwrap();
    assert_eq!(verdicts.len(), test_x.n_rows());
    let ids: Vec<u64> = test_x.event_ids().iter().map(|e| e.0 as u64).collect();
    for (i, v) in verdicts.iter().enumerate() {
        let row: BTreeMap<u64, f64> = ids.iter().zip(test_x.row(i)).map(|(&e, &c)| (e, c as f64)).collect();
        let mut violated = Vec::new();
        for (j, m) in models.iter().enumerate() {
            let delta = (row[&m.event] - expected(m, &row)).abs();
            assert!(
                common::rel_err(delta, v.deviations[j], 1e-9) < 1e-9,
                "row {i} event {}: {delta} vs {}",
                m.event,
                v.deviations[j]
            );
            if delta > m.threshold {
                violated.push(m.event);
            }
        }
        let unseen = row.get(&(u32::MAX as u64)).is_some_and(|&c| c > 0.0);
        let got: Vec<u64> = v.violated_events().map(|e| e.0 as u64).collect();
        assert_eq!(got, violated, "row {i}");
        assert_eq!(v.unseen_event_hit, unseen);
        assert_eq!(v.is_anomaly, unseen || !violated.is_empty());
    }
}

#[test]
fn detector_matches_forward_pass_from_bundle_json() {
    let ds = generate_synthetic(&SyntheticSpec::default().with_seed(9)).unwrap();
    check_detector_against_json(&ds.train, &ds.val, &ds.test);
}

#[test]
fn detector_matches_on_log_matrix_with_unseen_hits() {
    let split = common::hdfs_like_split(1200, 4);
    let last = split.test.n_cols() - 1;
    assert_eq!(split.test.event_ids()[last], EventId::UNSEEN);
    let mut test = EventCountMatrix::new(split.test.event_ids().to_vec(), split.test.source()).unwrap();
    for i in 0..split.test.n_rows() {
        let mut row = split.test.row(i).to_vec();
        if i % 7 == 0 {
            row[last] += 1;
        }
        test.push_row(split.test.sequence_ids()[i].clone(), split.test.labels()[i], &row).unwrap();
    }
    check_detector_against_json(&split.train, &split.val, &test);
}

/// Least-squares residuals of `y` on an intercept and `xs`.
fn residuals(y: &[f64], xs: &[&[f64]]) -> Vec<f64> {
    let n = y.len();
    let p = xs.len() + 1;
    let feature = |r: usize, c: usize| if c == 0 { 1.0 } else { xs[c - 1][r] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..n {
        for c in 0..p {
            for d in 0..p {
                a[c][d] += feature(r, c) * feature(r, d);
            }
            a[c][p] += feature(r, c) * y[r];
        }
    }
    for c in 0..p {
        let pivot = (c..p).max_by(|&u, &v| a[u][c].abs().total_cmp(&a[v][c].abs())).unwrap();
        a.swap(c, pivot);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for d in c..=p {
                    a[r][d] -= f * a[c][d];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|c| a[c][p] / a[c][c]).collect();
    (0..n)
        .map(|r| y[r] - (0..p).map(|c| beta[c] * feature(r, c)).sum::<f64>())
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn subsets(pool: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &v in pool {
        let grown: Vec<Vec<usize>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(v);
                t
            })
            .collect();
        out.extend(grown);
    }
    out
}

#[test]
fn partial_correlations_match_residual_regression() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 1500;
    let mut cols = vec![vec![0.0; n]; 5];
    for r in 0..n {
        let mut e = || -> f64 { StandardNormal.sample(&mut rng) };
        cols[0][r] = e();
        cols[1][r] = 0.9 * cols[0][r] + e();
        cols[2][r] = -0.7 * cols[1][r] + e();
        cols[3][r] = 0.8 * cols[1][r] + 0.5 * cols[2][r] + e();
        cols[4][r] = e();
    }
    let corr = CorrelationMatrix::from_columns(&cols);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let alpha = 0.05;
    let mut checked = 0;
    for i in 0..5 {
        for j in (i + 1)..5 {
            let rest: Vec<usize> = (0..5).filter(|&v| v != i && v != j).collect();
            for cond in subsets(&rest, 3) {
                let xs: Vec<&[f64]> = cond.iter().map(|&c| cols[c].as_slice()).collect();
                let r = pearson(&residuals(&cols[i], &xs), &residuals(&cols[j], &xs));
                let z = ((n - cond.len() - 3) as f64).sqrt() * r.atanh().abs();
                let p = 2.0 * (1.0 - normal.cdf(z));
                let got = corr.ci_test(i, j, &cond, alpha).unwrap();
                assert!((got.partial_correlation - r).abs() < 1e-9, "{i},{j}|{cond:?}");
                assert!((got.p_value - p).abs() < 1e-9, "{i},{j}|{cond:?}: {} vs {p}", got.p_value);
                assert_eq!(got.independent, p > alpha);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 10 * 8);
    assert!(discover_mb(&corr, 4, alpha, 3).members.is_empty());
    let want: BTreeSet<usize> = [0, 2, 3].into();
    assert_eq!(discover_mb(&corr, 1, alpha, 3).members.iter().copied().collect::<BTreeSet<_>>(), want);
}

/// Each masked token string lands in exactly one cluster, and each template
/// is the position-wise merge of its members: the shared token where they
/// agree, the wildcard where they differ.
#[test]
fn template_partition_matches_masked_grouping() {
    let corpus = generate_hdfs_like(&HdfsLikeSpec {
        blocks: 800,
        ..Default::default()
    });
    let config = ParserConfig {
        header: HeaderFormat::hdfs(),
        ..Default::default()
    };
    let text = corpus.lines.join("\n");
    let (lines, _) = read_log_lines(text.as_bytes(), &HeaderParser::new(&config.header).unwrap()).unwrap();
    let (store, messages, _) = fit_templates(&lines, &config).unwrap();
    let masker = Masker::new(&config.masks).unwrap();
    let mut by_key: BTreeMap<String, BTreeSet<EventId>> = BTreeMap::new();
    let mut by_template: BTreeMap<EventId, BTreeSet<String>> = BTreeMap::new();
    for (line, msg) in lines.iter().zip(&messages) {
        let key = masker.mask_tokens(&tokenize(&line.content)).join(" ");
        by_key.entry(key.clone()).or_default().insert(msg.template_id);
        by_template.entry(msg.template_id).or_default().insert(key);
    }
    assert!(by_key.values().all(|t| t.len() == 1), "{by_key:?}");
    for (id, keys) in &by_template {
        let rows: Vec<Vec<&str>> = keys.iter().map(|k| k.split(' ').collect()).collect();
        let merged: Vec<&str> = (0..rows[0].len())
            .map(|c| if rows.iter().all(|r| r[c] == rows[0][c]) { rows[0][c] } else { WILDCARD })
            .collect();
        assert_eq!(store.template(*id).unwrap().text(), merged.join(" "));
    }
    assert!(by_template.len() >= 10, "{} templates", by_template.len());
}

#[test]
fn synthetic_labels_match_golden_fixture() {
    let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let golden = include_str!("fixtures/synthetic_seed42_labels.jsonl");
    let got: Vec<String> = ds.labels.iter().map(|l| serde_json::to_string(l).unwrap()).collect();
    assert_eq!(got, golden.lines().collect::<Vec<_>>());
    let anomalous = ds.labels.iter().filter(|l| l.label == Label::Anomalous).count();
    let flagged = ds.test.labels().iter().filter(|l| l.is_anomalous()).count();
    assert_eq!(anomalous, flagged);
}
