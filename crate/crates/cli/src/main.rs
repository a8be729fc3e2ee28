use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use starlike_cli::{run, CliError, ConfigFile, PlotKind, RunConfig, RunSection, Task};

/// Spectral classification of Jacobi matrices on star-like graphs.
#[derive(Parser, Debug)]
#[command(name = "starlike", version)]
struct Args {
    /// Model and run settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Energy grid `MIN:MAX:COUNT`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Smallest imaginary part on the boundary ladder.
    #[arg(long)]
    eps_min: Option<f64>,
    /// Relative singular value cutoff for kernels.
    #[arg(long)]
    threshold: Option<f64>,
    /// Plot data to write (repeatable).
    #[arg(long = "plot", value_enum)]
    plots: Vec<PlotKind>,
    /// Half-line used by the density and ratio-evidence plots.
    #[arg(long)]
    root: Option<String>,
}

fn resolve(args: Args) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let over = RunSection {
        task: args.task,
        grid: args.grid,
        energies: None,
        out: args.out,
        seed: args.seed,
        jobs: args.jobs,
        eps_min: args.eps_min,
        threshold: args.threshold,
        plots: (!args.plots.is_empty()).then_some(args.plots),
        root: args.root,
    };
    RunConfig::resolve(file.run.overridden_by(over), file.model)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(args).and_then(|cfg| run(&cfg));
    match result {
        Ok(o) => {
            print!("{}", o.summary);
            if o.failures > 0 {
                eprintln!("{} point(s) failed", o.failures);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("starlike: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
