use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use torkam::report::diagnostic_json;
use torkam::{run_experiment, validate_config, ExperimentConfig, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "torkam", version, about = "Semiclassical KAM renormalization experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Refuse to run while any hypothesis check fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory (defaults to the config's `out`, then `torkam-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random symbols, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write report.json and CSV tables.
    Run { config: PathBuf },
    /// Check the configuration and print the validation report.
    Validate { config: PathBuf },
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.as_ref().map(PathBuf::from)))
        .unwrap_or_else(|| PathBuf::from("torkam-out"))
}

fn fail(err: &RunError, dir: Option<&Path>) -> ExitCode {
    let diag = diagnostic_json(err, None);
    if let Some(dir) = dir {
        if fs::create_dir_all(dir).and_then(|_| fs::write(dir.join("error.json"), &diag)).is_err() {
            eprintln!("could not write {}", dir.join("error.json").display());
        }
    }
    eprint!("{diag}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions { strict: cli.strict, seed: cli.seed };
    match &cli.command {
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(config) {
                Ok(c) => c,
                Err(e) => return fail(&e, cli.out.as_deref()),
            };
            let dir = out_dir(&cli, Some(&cfg));
            match run_experiment(&cfg, opts, &dir) {
                Ok(_) => {
                    println!("wrote {}", dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, Some(&dir)),
            }
        }
        Command::Validate { config } => {
            let validation = ExperimentConfig::load(config).and_then(|cfg| validate_config(&cfg, opts));
            match validation {
                Ok(v) => {
                    match serde_json::to_string_pretty(&v) {
                        Ok(s) => println!("{s}"),
                        Err(e) => return fail(&e.into(), None),
                    }
                    if v.blocked {
                        ExitCode::from(2)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(&e, None),
            }
        }
    }
}
