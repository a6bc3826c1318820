//! Resumable command-line pipeline: ingest articles, find repository
//! mentions, cut context windows, sample and import annotations, classify
//! intents, evaluate, and aggregate into figure tables and networks.

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

pub use cli::{execute, Cli, Command};
pub use config::PipelineConfig;
pub use error::PipelineError;
pub use stages::{Outcome, Runner, Stage, StageReport};
