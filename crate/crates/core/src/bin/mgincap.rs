use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mgincap::cli::{exit_code, run, Command, Overrides, ScenarioConfig};

/// Capacity, capacity bounds and PAM bounds for the mixed
/// Gaussian-impulsive noise channel.
#[derive(Debug, Parser)]
#[command(name = "mgincap", version)]
struct Args {
    /// pdf, moments, entropy, bounds, ba, pam, sweep, validate, or `run`
    /// for the config's command list.
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report information quantities in bits.
    #[arg(long)]
    bits: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Base output step of the BA discretization.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long = "ghq-order")]
    ghq_order: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let commands = if args.command == "run" {
        Vec::new()
    } else {
        match args.command.parse::<Command>() {
            Ok(c) => vec![c],
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(1);
            }
        }
    };
    let mut config = match ScenarioConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let overrides = Overrides {
        out: args.out,
        bits: args.bits,
        seed: args.seed,
        step: args.step,
        ghq_order: args.ghq_order,
    };
    if let Err(e) = overrides.apply(&mut config) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if commands.is_empty() && config.commands.is_empty() {
        eprintln!("error: the config lists no commands");
        return ExitCode::from(1);
    }
    match run(&config, &commands) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.failures > 0 {
                eprintln!("{} point(s) or check(s) failed", outcome.failures);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
