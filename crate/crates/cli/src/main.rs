use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use westcat::{parse_config, run_scenario, Command, RunOptions, EXIT_CONFIG};

#[derive(Parser, Debug)]
#[command(name = "westcat", version, about = "Coupled Westervelt and bioheat solver")]
struct Args {
    /// One of: run, mms, tau-study, inequalities, validate.
    #[arg(value_parser = ["run", "mms", "tau-study", "inequalities", "validate"])]
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Single-threaded execution for byte-stable output.
    #[arg(long)]
    deterministic: bool,
}

fn threads_from_env() -> Option<usize> {
    std::env::var("WESTCAT_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = Command::from_name(&args.command).expect("clap restricts command names");
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let opts = RunOptions { out_dir: args.out, seed: args.seed, deterministic: args.deterministic, threads: threads_from_env() };
    match run_scenario(&cfg, command, &opts) {
        Ok(result) => {
            for m in &result.messages {
                eprintln!("{m}");
            }
            eprintln!("{}: {}", command.name(), result.termination);
            ExitCode::from(result.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
