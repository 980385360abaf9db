//! `fbst`: e-values, GFBST decisions, composition and order selection from the command line.
//!
//! Exit codes: 0 success, 1 logic-verification failure, 2 invalid input,
//! 3 infeasible hypothesis or unbounded surprise, 4 sampler failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbst_core::sampler::Algorithm;
use fbst_core::truth::DEFAULT_N_MAX;
use fbst_core::FbstError;

#[derive(Debug, Parser)]
#[command(name = "fbst", version, about = "Full Bayesian Significance Test toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Master seed; generated and printed to stderr when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Retained posterior draws across all chains.
    #[arg(long, global = true, default_value_t = 200_000)]
    pub draws: usize,
    #[arg(long, global = true, default_value_t = 4)]
    pub chains: usize,
    /// Burn-in steps per chain.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub burnin: usize,
    #[arg(long, global = true, default_value = "metropolis")]
    pub algorithm: String,
    /// Support points kept when condensing truth ladders.
    #[arg(long, global = true, default_value_t = DEFAULT_N_MAX)]
    pub nmax: usize,
    /// GFBST decision threshold c.
    #[arg(long, global = true, default_value_t = fbst_core::gfbst::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write a CSV rendering of the result.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// E-value, standardized e-value and GFBST decision for one model and hypothesis.
    Ev(commands::EvArgs),
    /// Polynomial order selection by penalized error or by FBST.
    Select(commands::SelectArgs),
    /// Logical-coherence check of a decision rule on random grid models.
    VerifyLogic(commands::VerifyArgs),
    /// Disjunctive-normal-form e-value over independent serial models.
    Compose(commands::ComposeArgs),
}

fn exit_code(e: &FbstError) -> u8 {
    match e {
        FbstError::InfeasibleHypothesis(_) | FbstError::Unbounded(_) => 3,
        FbstError::SamplerStuck { .. }
        | FbstError::Initialization(_)
        | FbstError::DegenerateSeries(_)
        | FbstError::EmptySample => 4,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), FbstError> {
    let Ok(raw) = std::env::var("FBST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| FbstError::InvalidArgument(format!("FBST_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| FbstError::InvalidArgument(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let _: Algorithm = cli.global.algorithm.parse()?;
        match cli.command {
            Command::Ev(a) => commands::ev(&cli.global, a),
            Command::Select(a) => commands::select(&cli.global, a),
            Command::VerifyLogic(a) => commands::verify_logic(&cli.global, a),
            Command::Compose(a) => commands::compose(&cli.global, a),
        }
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fbst: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
