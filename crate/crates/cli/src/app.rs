//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::{
    cmd_report, cmd_run, cmd_sweep, cmd_verify, exit_code, CliError, ExperimentConfig, RunOptions, Status, SweepGrid,
};

/// Online logistic regression experiments and regret-bound verification.
///
/// Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 numeric abort.
#[derive(Parser)]
#[command(name = "regretlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run learners and write summary, curves and (optionally) full traces.
    Run(Common),
    /// Run learners and evaluate the configured checks.
    Verify(Common),
    /// Run learners over a grid of n, d, p1 and seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        p1: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Summarize the manifests in an output directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Base seed; replicate r uses seed ^ r.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    jobs: Option<usize>,
    /// Permit O(n^2) learners and checks beyond their default size limits.
    #[arg(long)]
    allow_slow: bool,
    /// Write every step to trace.csv.
    #[arg(long)]
    full_trace: bool,
    /// Shift the estimate by 0.1 per coordinate after step n/2 (negative control).
    #[arg(long)]
    sabotage: bool,
    /// Output directory (overrides the config and REGRETLAB_OUT_DIR).
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions), CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if self.seed.is_some() {
            cfg.base_seed = self.seed;
        }
        let opts = RunOptions {
            allow_slow: self.allow_slow,
            full_trace: self.full_trace,
            sabotage: self.sabotage,
            out_dir: self.out.clone(),
            quiet: self.quiet,
        };
        Ok((cfg, opts))
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}"))),
        _ => Ok(f()),
    }
}

fn dispatch(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, opts) = c.load()?;
            with_jobs(c.jobs, || cmd_run(&cfg, &opts))?
        }
        Command::Verify(c) => {
            let (cfg, opts) = c.load()?;
            with_jobs(c.jobs, || cmd_verify(&cfg, &opts))?
        }
        Command::Sweep { common, n, d, p1, seeds } => {
            let (cfg, opts) = common.load()?;
            let grid = SweepGrid { n, d, p1, seeds };
            with_jobs(common.jobs, || cmd_sweep(&cfg, &grid, &opts))?
        }
        Command::Report { dir } => cmd_report(&dir),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let result = dispatch(cli);
    if let Err(e) = &result {
        eprintln!("regretlab: {e}");
    }
    exit_code(&result)
}
