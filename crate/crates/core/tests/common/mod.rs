#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use logdp::evaluation::datasets::LabelTable;
use logdp::evaluation::hdfs_like::{generate_hdfs_like, HdfsLikeSpec};
use logdp::ingest::{fit_templates, read_log_lines, HeaderFormat, HeaderParser, ParserConfig, TemplateStore};
use logdp::mb::{discover_mb, symmetry_correct, CorrelationMatrix, MarkovBlanketMap, SymmetryRule};
use logdp::pipeline::{holdout_split, log_matrix};
use logdp::sequencer::split_train_val;
use logdp::{EventCountMatrix, EventId, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random linear-Gaussian DAG over `nodes` variables (topological order =
/// index order) and `n` samples of it.
pub struct GaussianDag {
    pub parents: Vec<Vec<usize>>,
    pub columns: Vec<Vec<f64>>,
}

pub fn gaussian_dag(seed: u64, nodes: usize, edge_p: f64, n: usize) -> GaussianDag {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents = vec![Vec::new(); nodes];
    let mut weights = vec![Vec::new(); nodes];
    for j in 0..nodes {
        for i in 0..j {
            if rng.gen_bool(edge_p) {
                let w: f64 = rng.gen_range(0.5..1.5);
                parents[j].push(i);
                weights[j].push(if rng.gen_bool(0.5) { w } else { -w });
            }
        }
    }
    let mut columns = vec![vec![0.0; n]; nodes];
    for r in 0..n {
        for j in 0..nodes {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let v = parents[j]
                .iter()
                .zip(&weights[j])
                .map(|(&p, &w)| w * columns[p][r])
                .sum::<f64>();
            columns[j][r] = v + noise;
        }
    }
    GaussianDag { parents, columns }
}

/// Parents, children and co-parents of every node.
pub fn true_blankets(parents: &[Vec<usize>]) -> Vec<BTreeSet<usize>> {
    let n = parents.len();
    let mut mb = vec![BTreeSet::new(); n];
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            mb[child].insert(p);
            mb[p].insert(child);
            for &q in ps {
                if q != p {
                    mb[p].insert(q);
                }
            }
        }
    }
    mb
}

/// AND-corrected blankets found by the library on raw columns.
pub fn discovered_blankets(columns: &[Vec<f64>], alpha: f64, max_cond: usize) -> Vec<BTreeSet<usize>> {
    let corr = CorrelationMatrix::from_columns(columns);
    let raw: BTreeMap<EventId, BTreeSet<EventId>> = (0..columns.len())
        .map(|j| {
            let found = discover_mb(&corr, j, alpha, max_cond);
            (EventId(j as u32), found.members.iter().map(|&c| EventId(c as u32)).collect())
        })
        .collect();
    let map = MarkovBlanketMap::from_blankets(raw, alpha, max_cond, None);
    let and = symmetry_correct(&map, SymmetryRule::And);
    (0..columns.len())
        .map(|j| and.blanket(EventId(j as u32)).unwrap().iter().map(|e| e.0 as usize).collect())
        .collect()
}

pub struct LogSplit {
    pub store: TemplateStore,
    pub train: EventCountMatrix,
    pub val: EventCountMatrix,
    pub test: EventCountMatrix,
}

/// HDFS-like corpus parsed, windowed by block, split 50/50 in time; the
/// clean first half is split 2/3 : 1/3 into train and validation.
pub fn hdfs_like_split(blocks: usize, seed: u64) -> LogSplit {
    let corpus = generate_hdfs_like(&HdfsLikeSpec {
        blocks,
        seed,
        ..Default::default()
    });
    let config = ParserConfig {
        header: HeaderFormat::hdfs(),
        ..Default::default()
    };
    let text = corpus.lines.join("\n");
    let (lines, _) = read_log_lines(text.as_bytes(), &HeaderParser::new(&config.header).unwrap()).unwrap();
    let (store, messages, _) = fit_templates(&lines, &config).unwrap();
    let table: LabelTable = corpus.labels.iter().cloned().collect();
    let (x, _) = log_matrix(&store, &messages, &WindowSpec::Session, Some(&table)).unwrap();
    let (pool, test) = holdout_split(&x, 0.5).unwrap();
    let (train, val) = split_train_val(&pool.normal_rows(), 2.0 / 3.0).unwrap();
    LogSplit {
        store,
        train,
        val,
        test,
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
