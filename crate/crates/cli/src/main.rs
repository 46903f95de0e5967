use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meanfield_cli::config::Mode;
use meanfield_cli::{execute, report};

#[derive(Parser)]
#[command(name = "meanfield", version, about = "Mean-field equation on the flat torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Run directory (created if missing)
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Override the grid size from the config
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize J_rho at a single rho
    Solve(RunArgs),
    /// Continuation rho = 8 pi - eps along a decreasing schedule
    Continue(RunArgs),
    /// Green function, Robin constant and local expansion
    Green(RunArgs),
    /// Test-function energies and the expansion fit
    Testfn(RunArgs),
    /// Verify a run directory and write report.json / report.md
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Solve(a) => (Mode::Solve, a),
        Command::Continue(a) => (Mode::Continue, a),
        Command::Green(a) => (Mode::Green, a),
        Command::Testfn(a) => (Mode::Testfn, a),
        Command::Report { run_dir, quiet } => {
            return match report::write(&run_dir) {
                Ok(r) => {
                    if !quiet {
                        print!("{}", report::markdown(&r));
                    }
                    if r.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            };
        }
    };
    match execute(mode, &args.config, &args.out, args.grid, args.quiet) {
        Ok(m) => {
            for c in m.checks.iter().filter(|c| !c.passed) {
                eprintln!("check {} failed: {:e} > {:e}", c.name, c.value, c.limit);
            }
            if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => fail(e),
    }
}

fn fail(e: meanfield_cli::error::CliError) -> ExitCode {
    eprintln!("error: {e}");
    let mut src = std::error::Error::source(&e);
    while let Some(s) = src {
        eprintln!("  caused by: {s}");
        src = s.source();
    }
    ExitCode::from(e.exit_code() as u8)
}
