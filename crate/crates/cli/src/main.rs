use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sip_cli::{run, CliError, Command, InvertFlags};

#[derive(Parser)]
#[command(name = "sip", version, about = "Counting-measure solutions of stochastic inverse problems")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory receiving the CSV artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone, Copy, Default)]
struct Flags {
    /// Use the volume-weighted counting measure.
    #[arg(long)]
    volumes: bool,
    /// Invert the corrected values Q_h + e_h.
    #[arg(long)]
    correct: bool,
    /// Spread lost mass over the supported cells.
    #[arg(long)]
    renormalize: bool,
}

impl Flags {
    fn invert(self, grid: bool) -> InvertFlags {
        InvertFlags { grid, volumes: self.volumes, correct: self.correct, renormalize: self.renormalize }
    }
}

#[derive(Subcommand)]
enum Sub {
    /// Write samples.csv.
    Sample,
    /// Write qoi.csv (with error-estimate columns when perturbed).
    Evaluate,
    /// Write density.csv.
    Density,
    /// Write measure.csv, or grid_measure.csv with --grid.
    Invert {
        /// Grid-based solve with Monte Carlo cell volumes.
        #[arg(long)]
        grid: bool,
        #[command(flatten)]
        flags: Flags,
    },
    /// Write events.csv with the probability of every configured event.
    Query {
        #[command(flatten)]
        flags: Flags,
    },
    /// Write one marginal_<a>_<b>.csv per configured pair.
    Marginal {
        #[command(flatten)]
        flags: Flags,
    },
    /// Write error_<event>.csv with the bounds and estimates per event.
    ErrorReport,
    /// Sample, evaluate, invert and marginalize the epidemic model.
    MseirsRepro,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fail = |e: CliError| {
        eprintln!("{}", e.line());
        ExitCode::from(e.exit_code())
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(CliError::Config(format!("thread pool: {e}")));
        }
    }
    let Some(config) = cli.config else {
        return fail(CliError::Config("--config is required".into()));
    };
    let command = match cli.command {
        Sub::Sample => Command::Sample,
        Sub::Evaluate => Command::Evaluate,
        Sub::Density => Command::Density,
        Sub::Invert { grid, flags } => Command::Invert(flags.invert(grid)),
        Sub::Query { flags } => Command::Query(flags.invert(false)),
        Sub::Marginal { flags } => Command::Marginal(flags.invert(false)),
        Sub::ErrorReport => Command::ErrorReport,
        Sub::MseirsRepro => Command::MseirsRepro,
    };
    match run(command, &config, &cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
