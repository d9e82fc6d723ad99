use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use zeroflow::config::{Config, Experiment};

/// Run a zeroflow experiment from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "zeroflow", version)]
struct Args {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = Config::load(&args.config)
        .and_then(|c| c.resolve(args.experiment, args.seed, args.out))
        .and_then(|c| zeroflow::run::run(&c));
    let code = match outcome {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
            if let Some(e) = &report.error {
                eprintln!("zeroflow: {e}");
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("zeroflow: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

