use std::process::ExitCode;

use clap::Parser;
use miner::{execute, Cli, Outcome};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("MINER_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(reports) => {
            for r in reports {
                let verb = match r.outcome {
                    Outcome::Ran => "done",
                    Outcome::Skipped => "up to date",
                    Outcome::Resumed => "resumed and done",
                };
                let counts = serde_json::to_string(&r.counts).unwrap_or_default();
                println!("{:<16} {:<16} {counts}", r.stage, verb);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
