use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use splinebvp_cli::{dump_spline, list_problems, run, CliError, ExperimentConfig, Overrides, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "splinebvp", version, about = "Boundary value problems solved on BC-coupled splines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        config: PathBuf,
        /// Output directory (beats SPLINEBVP_OUTPUT_DIR and the file).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated knot counts.
        #[arg(long, value_delimiter = ',')]
        knots: Option<Vec<usize>>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// List the built-in problems.
    ListProblems,
    /// Print samples of a saved solution as CSV.
    DumpSpline { solution: PathBuf, samples: usize },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output_dir,
            seeds,
            knots,
            degree,
            workers,
        } => ExperimentConfig::load(&config).and_then(|mut cfg| {
            let over = Overrides {
                output_dir,
                seeds,
                knots,
                degree,
                workers,
            };
            cfg.apply(&over, std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from));
            let outcome = run(&cfg)?;
            println!("{} jobs; table at {}", outcome.jobs, outcome.table.display());
            Ok(())
        }),
        Command::ListProblems => list_problems(std::io::stdout().lock()).map_err(|source| CliError::Io {
            path: "<stdout>".into(),
            source,
        }),
        Command::DumpSpline { solution, samples } => dump_spline(std::io::stdout().lock(), &solution, samples),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splinebvp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
