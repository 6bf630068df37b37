//! Raw logs shaped like HDFS DataNode/NameNode block traces, with a block
//! label table. Used where the public corpus is not available.

use std::collections::HashSet;
use std::io::Write;

use chrono::DateTime;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::event::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HdfsLikeSpec {
    pub blocks: usize,
    pub anomaly_rate: f64,
    pub seed: u64,
    /// Unix time of the first block.
    pub start: i64,
}

impl Default for HdfsLikeSpec {
    fn default() -> Self {
        Self {
            blocks: 2000,
            anomaly_rate: 0.03,
            seed: 7,
            start: 1_226_262_900,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockFault {
    /// One replica never acknowledges; no error line is logged.
    LostReplica,
    /// One replica deletion is never carried out.
    PartialDelete,
    WriteException,
    RedundantStore,
    ServeException,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HdfsLikeCorpus {
    pub lines: Vec<String>,
    /// Block ids with labels, in order of first log line.
    pub labels: Vec<(String, Label)>,
    pub faults: Vec<(String, BlockFault)>,
}

impl HdfsLikeCorpus {
    pub fn write_log<W: Write>(&self, out: &mut W) -> Result<()> {
        for l in &self.lines {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }

    /// `BlockId,Label` table in the public corpus convention.
    pub fn write_labels<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "BlockId,Label")?;
        for (id, label) in &self.labels {
            let l = if label.is_anomalous() { "Anomaly" } else { "Normal" };
            writeln!(out, "{id},{l}")?;
        }
        Ok(())
    }
}

struct Line {
    time: i64,
    block: usize,
    seq: usize,
    pid: u32,
    level: &'static str,
    component: &'static str,
    content: String,
}

fn ip(rng: &mut ChaCha8Rng) -> String {
    format!("10.25{}.{}.{}", rng.gen_range(0..2), rng.gen_range(1..255), rng.gen_range(1..255))
}

pub fn generate_hdfs_like(spec: &HdfsLikeSpec) -> HdfsLikeCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen = HashSet::new();
    let mut lines: Vec<Line> = Vec::new();
    let mut labels = Vec::with_capacity(spec.blocks);
    let mut faults = Vec::new();
    let faults_pool = [
        BlockFault::LostReplica,
        BlockFault::LostReplica,
        BlockFault::PartialDelete,
        BlockFault::WriteException,
        BlockFault::RedundantStore,
        BlockFault::ServeException,
    ];

    for b in 0..spec.blocks {
        let blk = loop {
            let raw: i64 = rng.gen_range(1..i64::MAX);
            let id = if rng.gen_bool(0.5) { format!("blk_-{raw}") } else { format!("blk_{raw}") };
            if seen.insert(id.clone()) {
                break id;
            }
        };
        let fault = rng.gen_bool(spec.anomaly_rate).then(|| *faults_pool.choose(&mut rng).unwrap());
        let t0 = spec.start + 2 * b as i64 + rng.gen_range(0..3);
        let mut seq = 0;
        let mut emit = |lines: &mut Vec<Line>, dt: i64, level, component, content: String| {
            lines.push(Line {
                time: t0 + dt,
                block: b,
                seq,
                pid: 0,
                level,
                component,
                content,
            });
            seq += 1;
        };
        let replicas = if rng.gen_bool(0.85) { 3 } else { 2 };
        let nodes: Vec<String> = (0..replicas).map(|_| ip(&mut rng)).collect();
        let size = if rng.gen_bool(0.8) { 67_108_864 } else { rng.gen_range(1_000..67_108_864) };
        let task = rng.gen_range(0..2000);

        emit(
            &mut lines,
            0,
            "INFO",
            "dfs.FSNamesystem",
            format!(
                "BLOCK* NameSystem.allocateBlock: /user/root/rand/_temporary/_task_200811092030_0001_m_{task:06}_0/part-{task:05}. {blk}"
            ),
        );
        for n in &nodes {
            let src = ip(&mut rng);
            let port = rng.gen_range(30000..60000);
            emit(
                &mut lines,
                0,
                "INFO",
                "dfs.DataNode$DataXceiver",
                format!("Receiving block {blk} src: /{src}:{port} dest: /{n}:50010"),
            );
        }
        let acked = if fault == Some(BlockFault::LostReplica) { replicas - 1 } else { replicas };
        for (k, n) in nodes.iter().enumerate().take(acked) {
            emit(
                &mut lines,
                1,
                "INFO",
                "dfs.DataNode$PacketResponder",
                format!("PacketResponder {} for block {blk} terminating", replicas - 1 - k),
            );
            let from = ip(&mut rng);
            emit(
                &mut lines,
                1,
                "INFO",
                "dfs.DataNode$PacketResponder",
                format!("Received block {blk} of size {size} from /{from}"),
            );
            emit(
                &mut lines,
                1,
                "INFO",
                "dfs.FSNamesystem",
                format!("BLOCK* NameSystem.addStoredBlock: blockMap updated: {n}:50010 is added to {blk} size {size}"),
            );
        }
        if fault == Some(BlockFault::WriteException) {
            emit(
                &mut lines,
                1,
                "INFO",
                "dfs.DataNode$BlockReceiver",
                format!("Exception in receiveBlock for block {blk} java.io.IOException: Connection reset by peer"),
            );
        }
        if fault == Some(BlockFault::RedundantStore) {
            emit(
                &mut lines,
                2,
                "INFO",
                "dfs.FSNamesystem",
                format!(
                    "BLOCK* NameSystem.addStoredBlock: Redundant addStoredBlock request received for {blk} on {}:50010 size {size}",
                    nodes[0]
                ),
            );
        }
        for _ in 0..rng.gen_range(0..=3) {
            let n = nodes.choose(&mut rng).unwrap().clone();
            let to = ip(&mut rng);
            emit(
                &mut lines,
                rng.gen_range(3..40),
                "INFO",
                "dfs.DataNode$DataXceiver",
                format!("{n}:50010 Served block {blk} to /{to}"),
            );
        }
        if fault == Some(BlockFault::ServeException) {
            let to = ip(&mut rng);
            emit(
                &mut lines,
                20,
                "WARN",
                "dfs.DataNode$DataXceiver",
                format!("{}:50010:Got exception while serving {blk} to /{to}:", nodes[0]),
            );
        }
        if rng.gen_bool(0.1) {
            let (from, to) = (nodes[0].clone(), ip(&mut rng));
            emit(
                &mut lines,
                30,
                "INFO",
                "dfs.DataNode",
                format!("{from}:50010 Starting thread to transfer block {blk} to {to}:50010"),
            );
            emit(
                &mut lines,
                31,
                "INFO",
                "dfs.DataNode$DataTransfer",
                format!("{from}:50010:Transmitted block {blk} to /{to}:50010"),
            );
        }
        let deleted = fault == Some(BlockFault::PartialDelete) || rng.gen_bool(0.3);
        if deleted {
            for n in &nodes {
                emit(
                    &mut lines,
                    60,
                    "INFO",
                    "dfs.FSNamesystem",
                    format!("BLOCK* NameSystem.delete: {blk} is added to invalidSet of {n}:50010"),
                );
            }
            let done = if fault == Some(BlockFault::PartialDelete) { replicas - 1 } else { replicas };
            for _ in 0..done {
                let sub = rng.gen_range(0..64);
                emit(
                    &mut lines,
                    62,
                    "INFO",
                    "dfs.FSDataset",
                    format!("Deleting block {blk} file /mnt/hadoop/dfs/data/current/subdir{sub}/{blk}"),
                );
            }
        }
        let label = if fault.is_some() { Label::Anomalous } else { Label::Normal };
        if let Some(f) = fault {
            faults.push((blk.clone(), f));
        }
        labels.push((blk, label));
    }

    lines.sort_by_key(|l| (l.time, l.block, l.seq));
    let mut pid_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed);
    let text = lines
        .into_iter()
        .map(|mut l| {
            l.pid = pid_rng.gen_range(1..40000);
            let ts = DateTime::from_timestamp(l.time, 0).expect("valid time").naive_utc();
            format!(
                "{} {} {} {}: {}",
                ts.format("%y%m%d %H%M%S"),
                l.pid,
                l.level,
                l.component,
                l.content
            )
        })
        .collect();
    HdfsLikeCorpus {
        lines: text,
        labels,
        faults,
    }
}
