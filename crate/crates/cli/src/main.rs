//! `idgnn`: reproducible pipelines over the identity-aware GNN toolkit.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 capability limit,
//! 4 numeric failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idgnn_core::Error;

#[derive(Parser, Debug)]
#[command(name = "idgnn", version, about = "Identity-aware GNN toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic graph dataset (JSONL).
    Generate(GenerateArgs),
    /// Append closed-walk count columns to every graph's node features.
    Features(FeaturesArgs),
    /// WL hashing, WL/isomorphism comparison and isomorphism dedupe.
    #[command(subcommand)]
    Wl(WlCommand),
    /// Random regular graph differentiation by closed-walk counts.
    Expressiveness(ExpressivenessArgs),
    /// Train a model on a synthetic task.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a task.
    Eval(EvalArgs),
    /// Summarize training reports as CSV.
    Report(ReportArgs),
    /// Rerun the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyArg {
    DRegular,
    SmallWorld,
    ScaleFree,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    /// Degree (d-regular).
    #[arg(long)]
    d: Option<usize>,
    /// Ring neighbors (small-world).
    #[arg(long)]
    k: Option<usize>,
    /// Attachments per new node (scale-free).
    #[arg(long)]
    m: Option<usize>,
    /// Rewiring or triad probability; a comma list is cycled across graphs.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    p: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum WlCommand {
    /// Print the WL hash of every graph in a graph or dataset file.
    Hash {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the first graph of two files.
    Compare { a: PathBuf, b: PathBuf },
    /// Keep one graph per isomorphism class.
    Dedupe {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ExpressivenessArgs {
    /// Node counts; zipped with --d.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    d: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5,6")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the three standard settings (64,4), (40,5), (96,6).
    #[arg(long)]
    standard_settings: bool,
    #[arg(long)]
    out: PathBuf,
    /// CSV table; defaults to the report path with a .csv extension.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum TaskArg {
    NodeCc,
    EdgeSpd,
    GraphCc,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FlavorArg {
    Gcn,
    Sage,
    Gin,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    Plain,
    IdFull,
    IdFast,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AggArg {
    Sum,
    Mean,
    Max,
}

#[derive(Args, Debug)]
struct TaskArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Seed for the split and for SPD pair sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    pairs_per_graph: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, value_enum, default_value = "sage")]
    flavor: FlavorArg,
    #[arg(long, value_enum, default_value = "plain")]
    variant: VariantArg,
    /// Defaults to 3, or 5 for edge-spd.
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, value_enum)]
    aggregation: Option<AggArg>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    fast_k: usize,
    /// Graphs per optimizer step; 0 for full batch.
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Shrink the hidden width until the model is no larger than the plain one.
    #[arg(long)]
    match_params: bool,
    /// Record wall-clock time in the report (breaks byte-identical reruns).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_report: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SplitArg {
    All,
    Train,
    Val,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "val")]
    split: SplitArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Capability(_) => 3,
        Error::Numeric(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
