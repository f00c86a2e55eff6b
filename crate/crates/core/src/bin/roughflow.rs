use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use roughflow::analysis::norm_report;
use roughflow::container::load_trajectory;
use roughflow::heat::kernel_check;
use roughflow::report::report;
use roughflow::scenario::{builtin_names, error_exit_code, run, RunOptions, Scenario};
use roughflow::Error;

/// Ricci-DeTurck flow lab for rough metrics on flat tori.
///
/// Worker threads are read from ROUGHFLOW_WORKERS.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a built-in scenario by name.
    Run {
        config: PathBuf,
        /// Run a single resolution instead of the configured sweep.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Rebuild the summary and plots of a run directory.
    Report {
        dir: PathBuf,
        #[arg(long)]
        no_plots: bool,
    },
    /// Check the heat kernel against its reference identities.
    KernelCheck,
    /// X-norm census of a saved trajectory.
    Norms {
        trajectory: PathBuf,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        /// Directory for the per-ball CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}

fn execute(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run { config, resolution, seed, out, no_plots } => {
            let scn = Scenario::load(&config)?;
            let opts = RunOptions { resolution, seed, out, plots: !no_plots, workers: None };
            let outcome = run(&scn, &opts)?;
            print!("{}", std::fs::read_to_string(outcome.dir.join("summary.txt"))?);
            println!("artifacts in {}", outcome.dir.display());
            Ok(outcome.exit_code() as u8)
        }
        Command::Report { dir, no_plots } => {
            let r = report(&dir, !no_plots)?;
            print!("{}", r.text);
            for p in &r.plots {
                println!("wrote {}", p.display());
            }
            Ok(if r.passed { 0 } else { 2 })
        }
        Command::KernelCheck => {
            let items = kernel_check()?;
            for i in &items {
                println!(
                    "{:<16} {:>12.3e}  tol {:>8.1e}  {}",
                    i.name,
                    i.value,
                    i.tolerance,
                    if i.passed() { "pass" } else { "FAIL" }
                );
            }
            Ok(if items.iter().all(|i| i.passed()) { 0 } else { 2 })
        }
        Command::Norms { trajectory, levels, out } => {
            let traj = load_trajectory(&trajectory)?;
            let r = norm_report(&traj, levels)?;
            print!("{}", r.summary());
            if let Some(dir) = out {
                for p in r.write_dir(&dir)? {
                    println!("wrote {}", p.display());
                }
            }
            Ok(0)
        }
        Command::List => {
            for n in builtin_names() {
                println!("{n}");
            }
            Ok(0)
        }
    }
}
