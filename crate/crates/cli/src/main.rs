use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fso_noma_cli::config::ExperimentConfig;
use fso_noma_cli::sweep::{cmd_outage, cmd_sumrate, Overrides};
use fso_noma_cli::validate::{run_validation, FixtureSource, ValidateOptions};
use fso_noma_cli::CliError;

/// Uplink NOMA over gamma-gamma FSO channels: outage and sum-rate sweeps.
#[derive(Debug, Parser)]
#[command(name = "fso-noma", version)]
struct Cli {
    /// Master seed for Monte Carlo streams (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per grid point (overrides the config).
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output CSV path; `-` for stdout (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-user outage, theory and Monte Carlo, over the config's grid.
    Outage { config: PathBuf },
    /// Ergodic sum rate of NOMA and OMA over the config's grid.
    Sumrate { config: PathBuf },
    /// Fixture and oracle checks.
    Validate {
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
        /// Read fixture tables from this directory instead of the built-in copies.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

fn write_output(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
        Some(p) if p == Path::new("-") => write_output(text, None),
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let ov = Overrides {
        seed: cli.seed,
        trials: cli.trials,
    };
    match cli.command {
        Command::Outage { ref config } | Command::Sumrate { ref config } => {
            let cfg = ExperimentConfig::load(config)?;
            let table = if matches!(cli.command, Command::Outage { .. }) {
                cmd_outage(&cfg, ov)?
            } else {
                cmd_sumrate(&cfg, ov)?
            };
            let out = cli.out.as_deref().or(cfg.output.as_deref());
            write_output(table.as_str(), out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { quick, fixtures } => {
            let mut opts = ValidateOptions {
                quick,
                ..ValidateOptions::default()
            };
            if let Some(dir) = fixtures {
                opts.fixtures = FixtureSource::Dir(dir);
            }
            if let Some(seed) = cli.seed {
                opts.seed = seed;
            }
            let checks = run_validation(&opts);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("validation failed: {}", failed.join(", "));
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
