//! `logdp`: parse logs, train dependency/proximity models, detect and
//! evaluate.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use settings::Overrides;

#[derive(Parser, Debug)]
#[command(name = "logdp", version, about = "Log anomaly detection from event dependency and proximity patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    /// Planted-dependency count matrices.
    Ecm,
    /// HDFS-style raw block logs with a label table.
    Logs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mine templates from a raw log and write parsed messages.
    Parse {
        /// Raw log file (overrides `paths.input`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Match against an existing template store instead of mining.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Output directory (overrides `paths.output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train models and thresholds from parsed messages or a count matrix.
    Train {
        /// Parsed messages from `parse`.
        #[arg(long, conflicts_with = "ecm", requires = "templates")]
        messages: Option<PathBuf>,
        /// Template store the messages were parsed with.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Training count matrix (all rows normal).
        #[arg(long)]
        ecm: Option<PathBuf>,
        /// Validation count matrix; split from the training data when absent.
        #[arg(long, requires = "ecm")]
        val: Option<PathBuf>,
        /// Sequence label table (`id,label` CSV) overriding line labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Hold out the last fraction of sequences as a test matrix.
        #[arg(long)]
        holdout_fraction: Option<f64>,
        /// Drop anomalous sequences from the training pool instead of failing.
        #[arg(long)]
        drop_anomalous: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score sequences against a trained bundle.
    Detect {
        #[arg(long)]
        bundle: PathBuf,
        /// Test count matrix.
        #[arg(long, conflicts_with = "messages")]
        ecm: Option<PathBuf>,
        /// Parsed test messages (needs --templates).
        #[arg(long, requires = "templates")]
        messages: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Verdict file to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare verdicts with ground truth.
    Evaluate {
        #[arg(long)]
        verdicts: PathBuf,
        /// Count matrix, `id,label` CSV or JSONL label records.
        #[arg(long)]
        labels: PathBuf,
        /// Machine-readable metrics file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long, value_enum, default_value = "ecm")]
        kind: SynthKind,
        /// JSON synthetic spec (ecm kind); the default spec otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of blocks (logs kind).
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        anomaly_rate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use logdp::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Config(_)) => 2,
        Some(
            E::FingerprintMismatch { .. }
            | E::AnomalousTrainingRow { .. }
            | E::SchemaMismatch { .. }
            | E::IdMismatch { .. }
            | E::EmptyValidation
            | E::EmptyTraining,
        ) => 3,
        Some(E::File { .. } | E::Io(_)) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse {
            input,
            templates,
            out,
            overrides,
        } => commands::parse(input, templates, out, &overrides),
        Command::Train {
            messages,
            templates,
            ecm,
            val,
            labels,
            holdout_fraction,
            drop_anomalous,
            out,
            overrides,
        } => commands::train(commands::TrainArgs {
            messages,
            templates,
            ecm,
            val,
            labels,
            holdout_fraction,
            drop_anomalous,
            out,
            overrides,
        }),
        Command::Detect {
            bundle,
            ecm,
            messages,
            templates,
            labels,
            out,
            overrides,
        } => commands::detect(bundle, ecm, messages, templates, labels, out, &overrides),
        Command::Evaluate { verdicts, labels, out } => commands::evaluate(verdicts, labels, out),
        Command::Synth {
            kind,
            spec,
            seed,
            blocks,
            anomaly_rate,
            out,
        } => match kind {
            SynthKind::Ecm => commands::synth_ecm(spec, seed, anomaly_rate, out),
            SynthKind::Logs => commands::synth_logs(seed, blocks, anomaly_rate, out),
        },
        Command::Config { overrides } => commands::print_config(&overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
