use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mann_cli::{cmd_audit, cmd_report, cmd_run, cmd_sweep, CliError, Outcome, Overrides};

/// Mann iteration experiments with trajectory auditors.
#[derive(Debug, Parser)]
#[command(name = "mann", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Output directory, overriding `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary on standard output.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            quiet: self.quiet,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment, audit it, and write trajectory and audit files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one experiment per value of a numeric config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted field name, e.g. `schedule.t` or `space.dimension`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[command(flatten)]
        common: Common,
    },
    /// Re-audit a stored trajectory (`.csv` or `.json`).
    Audit {
        trajectory: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the summary table of an audit JSON file or run directory.
    Report { path: PathBuf },
}

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Run { config, common } => cmd_run(&config, &common.overrides()),
        Command::Sweep {
            config,
            axis,
            values,
            common,
        } => {
            let values: Vec<String> = values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(String::from)
                .collect();
            cmd_sweep(&config, &axis, &values, &common.overrides())
        }
        Command::Audit {
            trajectory,
            config,
            common,
        } => cmd_audit(&trajectory, &config, &common.overrides()),
        Command::Report { path } => cmd_report(&path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
