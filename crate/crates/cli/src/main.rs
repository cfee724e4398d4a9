//! `rhythm`: run scenario files, check the linkability formulas against
//! their Monte Carlo oracle, and time the crypto provider.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or I/O error.

mod bench;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rhythm", version, about = "Hybrid pseudonym simulator and linkability checks")]
struct Cli {
    /// Log more (repeat for debug and trace). RHYTHM_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment file and write CSV tables, traces and logs.
    Run(RunArgs),
    /// Compare every closed-form linking probability with its Monte Carlo
    /// estimate over the sweep grid.
    VerifyFormulas(VerifyArgs),
    /// Time the elliptic-curve provider's sign, verify, group sign and
    /// group verify.
    BenchCrypto(BenchArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Opt-in probability.
    #[arg(long)]
    r: Option<f64>,
    /// Fraction of vehicles without VPKI pseudonyms.
    #[arg(long)]
    p: Option<f64>,
    /// Pseudonym lifetime in seconds.
    #[arg(long = "tau-p")]
    tau_p: Option<f64>,
    /// Γ period in seconds.
    #[arg(long)]
    gamma: Option<f64>,
    /// Monte Carlo rounds per point for sweep experiments.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Monte Carlo rounds per grid cell.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Tolerance in standard errors.
    #[arg(long, default_value_t = 4.0)]
    sigmas: f64,
    /// Replace one closed form with a wrong one (negative control).
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 200)]
    iterations: usize,
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RHYTHM_LOG", default)).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let code = match cli.command {
        Command::Run(args) => run::cmd_run(&args),
        Command::VerifyFormulas(args) => verify::cmd_verify_formulas(&args),
        Command::BenchCrypto(args) => bench::cmd_bench_crypto(&args),
    };
    ExitCode::from(code)
}
