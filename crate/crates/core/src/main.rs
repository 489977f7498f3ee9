use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levycoupling::cli_harness::{apply_overrides, list_presets, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "levycoupling", version, about = "Coupling experiments for Levy-driven SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the model, coefficient and scenario catalog.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            print!("{}", list_presets());
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, out } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => apply_overrides(c, seed, out.as_deref()),
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run(&cfg) {
                Ok(outcome) => {
                    print!("{}", outcome.report);
                    println!("artifacts in {}", outcome.out_dir.display());
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
