use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

use sipkit::{execute, resolve, Config, Experiment};

const EXIT_USAGE: u8 = 1;
const EXIT_CHECKS: u8 = 2;

/// Reproduce the stochastic inverse problem examples.
#[derive(Parser)]
#[command(name = "sipkit", version)]
struct Cli {
    /// List the experiments and exit.
    #[arg(long)]
    list: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts and summary.json.
    Run {
        #[arg(long)]
        experiment: Option<Experiment>,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default out/<experiment>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for inner numerical loops (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the experiments.
    List,
}

fn list() {
    for e in Experiment::ALL {
        println!("{:<28} {}", e.name(), e.description());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match cli.command {
        _ if cli.list => list(),
        Some(Command::List) => list(),
        Some(Command::Run { experiment, seed, config, out, threads }) => return run(experiment, seed, config, out, threads),
        None => {
            let _ = Cli::command().print_help();
            return ExitCode::from(EXIT_USAGE);
        }
    }
    ExitCode::SUCCESS
}

fn run(experiment: Option<Experiment>, seed: Option<u64>, config: Option<PathBuf>, out: Option<PathBuf>, threads: Option<usize>) -> ExitCode {
    let resolved = config
        .as_deref()
        .map(Config::load)
        .transpose()
        .and_then(|file| resolve(file, experiment, seed, out, threads));
    let r = match resolved {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(n) = r.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let summary = match execute(&r) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    for c in &summary.checks {
        println!("{} {}: {} (target {} tol {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target, c.tol);
    }
    println!("{} in {:.1}s -> {}", summary.experiment, summary.wall_time_s, r.output_dir.join("summary.json").display());
    if summary.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECKS)
    }
}
