mod commands;
mod config;
mod error;
mod record;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::RunArgs;
use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "moboga",
    version,
    about = "Constrained multi-objective Bayesian optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore a problem and recommend a point from its Pareto front.
    Run {
        /// TOML run configuration.
        config: Option<PathBuf>,
        /// Built-in problem name (overrides the config's).
        #[arg(long)]
        problem: Option<String>,
        /// Total evaluation budget, initial design included.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, env = "MOBOGA_SEED")]
        seed: Option<u64>,
        /// Run record output path.
        #[arg(short, long, default_value = "moboga-run.jsonl")]
        out: PathBuf,
    },
    /// Export a run record as CSV, one row per observation.
    Front {
        record: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a benchmark study and check it against its oracle.
    Verify {
        which: Study,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// List the built-in problems.
    Problems,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    BinhKorn,
    ConstrEx,
    #[value(name = "sinusoid-1d")]
    Sinusoid1d,
}

impl Study {
    fn name(self) -> &'static str {
        match self {
            Study::BinhKorn => "binh-korn",
            Study::ConstrEx => "constr-ex",
            Study::Sinusoid1d => "sinusoid-1d",
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    match cli.command {
        Command::Run {
            config,
            problem,
            iters,
            seed,
            out,
        } => commands::cmd_run(
            &RunArgs {
                config,
                problem,
                iters,
                seed,
                out,
            },
            &mut stdout,
        ),
        Command::Front { record, out: None } => commands::cmd_front(&record, &mut stdout),
        Command::Front {
            record,
            out: Some(path),
        } => {
            let mut file =
                std::fs::File::create(&path).map_err(|e| error::CliError::io(&path, e))?;
            commands::cmd_front(&record, &mut file)?;
            file.flush().map_err(|e| error::CliError::io(&path, e))
        }
        Command::Verify { which, out_dir } => {
            commands::cmd_verify(which.name(), &out_dir, &mut stdout)
        }
        Command::Problems => commands::cmd_problems(&mut stdout),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("moboga: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
