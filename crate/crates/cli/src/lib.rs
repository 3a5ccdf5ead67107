//! The `rex` pipeline: preprocess, train, explain, evaluate and ablate, each
//! driven by one JSON run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rex", version, about = "Explain knowledge-graph hypotheses with relevant paths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the top-level seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Caps the worker thread count.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides one config key, e.g. `--set training.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Augment the graph, cluster entities and score information content.
    Preprocess(Common),
    /// Train the path-finding policy.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Build explanation subgraphs for one hypothesis or the test split.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 3, value_names = ["SUBJECT", "RELATION", "OBJECT"])]
        hypothesis: Option<Vec<String>>,
    },
    /// Rank test hypotheses with the trained policy.
    Evaluate(Common),
    /// Train and evaluate the four reward/early-stop variants.
    Ablate(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Preprocess(c) | Command::Evaluate(c) | Command::Ablate(c) => c,
            Command::Train { common, .. } | Command::Explain { common, .. } => common,
        }
    }
}

/// Runs a parsed command; returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let common = cli.command.common();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // A global pool set earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        set: common.set.clone(),
    };
    let cfg = RunConfig::load(&common.config, &overrides)?;
    match &cli.command {
        Command::Preprocess(_) => commands::preprocess(&cfg),
        Command::Train { resume, .. } => commands::train_cmd(&cfg, *resume),
        Command::Explain { hypothesis, .. } => commands::explain(&cfg, hypothesis.as_deref()),
        Command::Evaluate(_) => commands::evaluate_cmd(&cfg),
        Command::Ablate(_) => commands::ablate(&cfg),
    }
}
