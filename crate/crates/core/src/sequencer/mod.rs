//! Grouping parsed messages into sequences and counting events per sequence.

mod ecm;
mod window;

pub use ecm::{build_ecm, split_train_val, EventCountMatrix};
pub use window::{partition, LogSequence, PartitionReport, WindowSpec, WindowUnit};
