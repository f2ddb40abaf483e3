//! Command-line front end for tournament re-ranking.

mod compare;
mod config;
mod inputs;
mod rank;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tourrank::baselines::RerankError;
use tourrank::{EngineError, JudgeError};

use crate::inputs::AuthFailure;

/// Bad arguments that clap cannot catch; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 2;
const EXIT_AUTH: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "tourrank",
    version,
    about = "Tournament-style zero-shot document re-ranking"
)]
struct Cli {
    /// TOML file with run settings; flags override it, it overrides
    /// TOURRANK_* environment variables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Re-rank each query's candidates and write a TREC run file.
    Rank(Box<rank::RankArgs>),
    /// Compare methods across initial-order perturbations.
    Compare(Box<compare::CompareArgs>),
    /// Print analytic cost models.
    Cost(tools::CostArgs),
    /// NDCG of a run file against qrels.
    Eval(tools::EvalArgs),
    /// Write a synthetic benchmark.
    Synth(tools::SynthArgs),
}

fn is_auth(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        if e.is::<AuthFailure>() {
            return true;
        }
        let judge = e
            .downcast_ref::<EngineError>()
            .and_then(EngineError::judge_error)
            .or_else(|| match e.downcast_ref::<RerankError>() {
                Some(RerankError::Engine(inner)) => inner.judge_error(),
                Some(RerankError::Window { source, .. }) => Some(source),
                _ => None,
            })
            .or_else(|| e.downcast_ref::<JudgeError>());
        matches!(judge, Some(JudgeError::Auth { .. }))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result = match &cli.command {
        Command::Rank(args) => rank::run(args, config),
        Command::Compare(args) => compare::run(args, config),
        Command::Cost(args) => tools::cost(args),
        Command::Eval(args) => tools::eval(args),
        Command::Synth(args) => tools::synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_auth(&err) {
                ExitCode::from(EXIT_AUTH)
            } else if err.chain().any(|e| e.is::<UsageError>()) {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
