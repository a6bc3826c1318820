use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::stages::{Runner, Stage, StageReport};

#[derive(Debug, Parser)]
#[command(name = "miner", version, about = "Mine repository mentions and their intents from full-text articles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline config file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory; overrides `run_dir` from the config
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Recompute even when outputs are up to date
    #[arg(long)]
    pub force: bool,
    /// Worker threads for per-document stages
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load JATS/JSONL articles and enrich metadata
    Ingest(Common),
    /// Find repository mentions
    Match(Common),
    /// Cut context windows around mentions
    Contexts(Common),
    /// Draw the annotation sample
    Sample(Common),
    /// Write sampled tasks for the labeling tool
    AnnotateExport(Common),
    /// Import labelled annotations
    AnnotateImport(Common),
    /// Classify every context
    Predict(Common),
    /// Split the gold set and score predictions
    Evaluate(Common),
    /// Compute distributions and networks
    Analyze(Common),
    /// Write figure tables and network files
    Export(Common),
    /// Run every stage in order, skipping completed ones
    Run(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Ingest(c)
            | Command::Match(c)
            | Command::Contexts(c)
            | Command::Sample(c)
            | Command::AnnotateExport(c)
            | Command::AnnotateImport(c)
            | Command::Predict(c)
            | Command::Evaluate(c)
            | Command::Analyze(c)
            | Command::Export(c)
            | Command::Run(c) => c,
        }
    }

    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Ingest(_) => Stage::Ingest,
            Command::Match(_) => Stage::Match,
            Command::Contexts(_) => Stage::Contexts,
            Command::Sample(_) => Stage::Sample,
            Command::AnnotateExport(_) => Stage::AnnotateExport,
            Command::AnnotateImport(_) => Stage::AnnotateImport,
            Command::Predict(_) => Stage::Predict,
            Command::Evaluate(_) => Stage::Evaluate,
            Command::Analyze(_) => Stage::Analyze,
            Command::Export(_) => Stage::Export,
            Command::Run(_) => return None,
        })
    }
}

/// Stages `run` executes: all of them, minus the annotation import and
/// evaluation when no annotation file is configured.
pub fn plan(cfg: &PipelineConfig) -> Vec<Stage> {
    Stage::ALL
        .into_iter()
        .filter(|s| cfg.annotations.path.is_some() || !matches!(s, Stage::AnnotateImport | Stage::Evaluate))
        .collect()
}

pub fn execute(cli: &Cli) -> Result<Vec<StageReport>> {
    let common = cli.command.common();
    let cfg = PipelineConfig::load(&common.config)?;
    let run_dir = common.run_dir.clone().unwrap_or_else(|| cfg.run_dir());
    let stages = match cli.command.stage() {
        Some(s) => vec![s],
        None => plan(&cfg),
    };
    let mut runner = Runner::open(cfg, run_dir, common.force, common.workers)?;
    stages.into_iter().map(|s| runner.run_stage(s)).collect()
}
