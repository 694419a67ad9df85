//! The `murp` command-line tool.
//!
//! Every subcommand accepts `--config FILE` with `key=value` lines named after
//! the long flags; flags given on the command line win. Text outputs start
//! with `#` lines echoing the resolved settings.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use murp::TieMode;

pub mod config;
pub mod output;

mod analyze;
mod eval;
mod plot;
mod train;

#[derive(Parser, Debug)]
#[command(
    name = "murp",
    version,
    about = "Multi-relational Poincaré and Euclidean graph embeddings"
)]
pub struct Cli {
    /// `key=value` settings file; command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and keep the checkpoint with the best validation MRR.
    Train(TrainArgs),
    /// Filtered link prediction metrics for a checkpoint.
    Eval(EvalArgs),
    /// Per-relation hierarchy statistics of a dataset.
    Analyze(AnalyzeArgs),
    /// Build subsets with a given share of hierarchical relations.
    Split(SplitArgs),
    /// 2D projection of object embeddings relative to a subject.
    Project2d(ProjectArgs),
    /// Embedding norms next to entity biases.
    BiasNorms(BiasNormsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeometryName {
    Poincare,
    Euclidean,
}

impl FromStr for GeometryName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl fmt::Display for GeometryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryName::Poincare => "poincare",
            GeometryName::Euclidean => "euclidean",
        })
    }
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Dataset directory holding train.txt, valid.txt and test.txt.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for model.ckpt and trace.tsv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: poincare]
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryName>,
    /// Ball curvature, Poincaré geometry only. [default: 1]
    #[arg(long)]
    pub c: Option<f64>,
    /// Embedding dimension. [default: 40]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Learning rate. [default: 50]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Positive triples per batch. [default: 128]
    #[arg(long)]
    pub batch: Option<usize>,
    /// Negative samples per positive. [default: 50]
    #[arg(long)]
    pub neg: Option<usize>,
    /// [default: 500]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Drawn from entropy and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs between evaluations. [default: 5]
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Scale of the initial embeddings. [default: 0.001]
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Gradient shards per batch. [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Training triples ranked for the trace; 0 means all. [default: 1000]
    #[arg(long)]
    pub train_eval_limit: Option<usize>,
    /// mid, optimistic or pessimistic. [default: mid]
    #[arg(long)]
    pub ties: Option<TieMode>,
}

#[derive(Args, Debug, Default)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset directory; filtering uses all of its splits.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// train, valid or test. [default: test]
    #[arg(long)]
    pub split: Option<String>,
    /// [default: mid]
    #[arg(long)]
    pub ties: Option<TieMode>,
    /// Add one row per relation with its hierarchy statistics.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub per_relation: Option<bool>,
    /// Report file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Minimum Khs of a hierarchical relation. [default: 0.9]
    #[arg(long)]
    pub khs_threshold: Option<f64>,
    /// Minimum longest shortest path of a hierarchical relation. [default: 2]
    #[arg(long)]
    pub min_max_path: Option<usize>,
    /// Report file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// New directory receiving one dataset per proportion plus manifest.tsv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated shares of hierarchical relations. [default: 1,0.75,0.5,0.25]
    #[arg(long)]
    pub proportions: Option<String>,
    /// [default: 0.9]
    #[arg(long)]
    pub khs_threshold: Option<f64>,
    /// [default: 2]
    #[arg(long)]
    pub min_max_path: Option<usize>,
    /// Drawn from entropy and printed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pool all splits and draw new validation and test sets first.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resplit: Option<bool>,
    /// [default: 10000]
    #[arg(long)]
    pub valid_size: Option<usize>,
    /// [default: 10000]
    #[arg(long)]
    pub test_size: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct ProjectArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub subject: Option<String>,
    /// Base relation name, or its reciprocal name.
    #[arg(long)]
    pub relation: Option<String>,
    /// Comma-separated object entities.
    #[arg(long)]
    pub objects: Option<String>,
    /// Number of object entities drawn at random instead of --objects.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Seed for --sample. [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset directory supplying true labels for the TP/FP/TN/FN column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct BiasNormsArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Train(a) => train::run(a, config),
        Command::Eval(a) => eval::run(a, config),
        Command::Analyze(a) => analyze::analyze(a, config),
        Command::Split(a) => analyze::split(a, config),
        Command::Project2d(a) => plot::project2d(a, config),
        Command::BiasNorms(a) => plot::bias_norms(a, config),
    }
}

/// Seed from the settings, or a fresh one from entropy (announced on stdout).
fn resolve_seed(r: &mut config::Resolver, flag: Option<u64>) -> Result<u64> {
    let seed = match r.opt("seed", flag)? {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            println!("seed\t{s}\t(drawn from entropy)");
            s
        }
    };
    r.record("seed", seed);
    Ok(seed)
}
