use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lagflow_cli::commands;
use lagflow_cli::CliError;

#[derive(Parser)]
#[command(name = "lagflow", version, about = "1D Lagrangian compressible flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration and write a trajectory directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a trajectory directory and write the certificate.
    Certify {
        #[arg(long)]
        traj: PathBuf,
    },
    /// Joint space-time refinement study; CSV on stdout.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed-point construction on a short window; JSON on stdout.
    Picard {
        #[arg(long)]
        config: PathBuf,
    },
    /// Density-floor sequence against the vacuum run; CSV on stdout.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated floor denominators, e.g. `10,100,1000`.
        #[arg(long)]
        floors: String,
    },
}

/// Writes to stdout, treating a closed pipe as success.
fn emit(text: &str) -> Result<(), CliError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, out } => {
            let dir = commands::cmd_run(&config, out.as_deref())?;
            emit(&format!("wrote {}\n", dir.display()))?;
        }
        Command::Certify { traj } => {
            commands::cmd_certify(&traj)?;
            emit("all verdicts pass\n")?;
        }
        Command::Convergence { config, levels, out } => {
            let csv = commands::cmd_convergence(&config, levels)?;
            emit(&csv)?;
            if let Some(p) = out {
                std::fs::write(&p, &csv)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            }
        }
        Command::Picard { config } => {
            let (_, json) = commands::cmd_picard(&config)?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&json).expect("json")))?;
        }
        Command::Sweep { config, floors } => {
            let floors = commands::parse_floors(&floors)?;
            let (_, csv) = commands::cmd_sweep(&config, &floors)?;
            emit(&csv)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
