//! `se3m`: story-point estimation pipeline.

mod commands;
mod config;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use se3m::estimator::{ExperimentId, InputMode};

use crate::config::PipelineConfig;

#[derive(Parser)]
#[command(name = "se3m", version, about = "Story-point estimation from requirement text")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat `key = value` configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Experiment to run (E1 to E5)
    #[arg(long, global = true, value_name = "ID")]
    experiment: Option<ExperimentId>,
    /// Number of cross-validation folds
    #[arg(long, global = true, value_name = "K")]
    kfold: Option<usize>,
    /// Hold out one project per round instead of k-fold
    #[arg(long, global = true)]
    by_project: bool,
    /// Seed for splits, initialization and sampling
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Estimator input: token sequence or pooled vector
    #[arg(long, global = true, value_name = "MODE")]
    mode: Option<InputMode>,
    /// Run directory holding `models/` and `reports/`
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Any configuration key, as KEY=VALUE; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the labeled corpus
    Ingest,
    /// Corpus statistics and histograms
    Stats,
    /// Train base word vectors
    PretrainStatic,
    /// Pretrain the base transformer encoder
    PretrainCtx,
    /// Continue word-vector training on the domain corpus
    FinetuneStatic,
    /// Continue encoder pretraining on the domain corpus
    FinetuneCtx,
    /// Export one sentence embedding per requirement
    Embed,
    /// Train an estimator on the whole labeled corpus
    Train,
    /// Cross-validate an experiment
    Evaluate,
    /// Estimate one requirement
    Predict {
        /// Requirement text
        text: String,
    },
    /// Serve estimates over HTTP
    Serve {
        /// Listen address
        #[arg(long, default_value = "127.0.0.1:8080", value_name = "HOST:PORT")]
        bind: String,
    },
    /// Bundle every evaluation under the report directory
    Report,
}

fn pipeline_config(args: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let mut config = PipelineConfig::new();
    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{item}`"))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(e) = args.experiment {
        config.experiment = e;
    }
    if let Some(k) = args.kfold {
        config.kfold = k;
    }
    if args.by_project {
        config.by_project = true;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = args.mode {
        config.head.input = m;
    }
    if let Some(o) = &args.out {
        config.out = o.clone();
    }
    config.finish();
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = pipeline_config(&cli.global)?;
    match cli.command {
        Command::Ingest => commands::ingest(&config),
        Command::Stats => commands::stats(&config),
        Command::PretrainStatic => commands::pretrain_static(&config),
        Command::PretrainCtx => commands::pretrain_ctx(&config),
        Command::FinetuneStatic => commands::finetune_static(&config),
        Command::FinetuneCtx => commands::finetune_ctx(&config),
        Command::Embed => commands::embed(&config),
        Command::Train => commands::train(&config),
        Command::Evaluate => commands::evaluate(&config),
        Command::Predict { text } => commands::predict(&config, &text),
        Command::Serve { bind } => serve::serve(&config, &bind),
        Command::Report => commands::report(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
