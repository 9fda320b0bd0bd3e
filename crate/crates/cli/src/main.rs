use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use excursion_cli::{exit_code, load_config, report, run_to_dir, BoundViolation};

#[derive(Parser)]
#[command(name = "excursion", version, about = "Tail experiments for random-walk excursion areas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV, JSON and SVG artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Also write a ratio plot.
        #[arg(long)]
        svg: bool,
    },
    /// Join estimates with predictions from run directories or CSV files.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Directory for report.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a configuration without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            svg,
        } => {
            let config = load_config(&config)?;
            if let Some(t) = threads {
                if !excursion_core::exec::configure_threads(t) {
                    eprintln!("warning: thread pool already configured; --threads {t} ignored");
                }
            }
            let result = run_to_dir(&config, &out, svg)?;
            let truncated = result.max_truncated();
            if truncated > 0 {
                eprintln!("warning: up to {truncated} excursion(s) per estimate hit max_steps");
            }
            Ok(())
        }
        Command::Report { paths, out } => {
            let r = report::build_report(&paths)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            report::write_report(&r, out.as_deref())?;
            match r.violations() {
                0 => Ok(()),
                v => Err(BoundViolation(v).into()),
            }
        }
        Command::ValidateConfig { config } => {
            load_config(&config)?;
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
