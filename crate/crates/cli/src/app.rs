//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, warn};

use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::formats::create_output;
use crate::pipeline::{convert, run, verify_file, ConvertTarget, RunOptions};
use crate::summary::summarize;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "GENESOL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "genesol", version, about = "Solve, coarsen, construct and verify generalized solutions on periodic grids")]
pub struct Cli {
    /// Overrides `integrator.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Multiplies every configured tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tolerance_scale: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured pipeline: solve, coarsen, construct, verify.
    Run { config: PathBuf },
    /// Summarize a trajectory, measure, varifold or report file.
    Report {
        path: PathBuf,
        /// Write tab-separated columns for plotting.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Verify a stored trajectory with a config's model and verifier settings.
    Verify { trajectory: PathBuf, config: PathBuf },
    /// Coarsen a stored trajectory into measures or a varifold.
    Convert {
        trajectory: PathBuf,
        #[arg(long, value_enum)]
        to: Target,
        /// Coarsening block size in cells.
        #[arg(long, default_value_t = 2)]
        block: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Measure,
    Varifold,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    // A pool built earlier in the same process keeps its size.
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        warn!("worker pool already initialized; {THREADS_VAR} ignored");
    }
    Ok(())
}

fn execute<W: Write>(cli: &Cli, out: &mut W) -> CliResult<()> {
    let print = |out: &mut W, s: &str| {
        out.write_all(s.as_bytes()).map_err(|source| CliError::Write { path: PathBuf::from("<stdout>"), source })
    };
    if !(cli.tolerance_scale.is_finite() && cli.tolerance_scale > 0.0) {
        return Err(CliError::Config(format!("--tolerance-scale must be positive, got {}", cli.tolerance_scale)));
    }
    configure_threads()?;
    let opts = RunOptions { seed: cli.seed, force: cli.force, tolerance_scale: cli.tolerance_scale };
    match &cli.command {
        Command::Run { config } => {
            let loaded = LoadedConfig::load(config)?;
            let (report, paths) = run(&loaded, opts)?;
            print(
                out,
                &format!(
                    "max_violation {:e}\nreport {}\ntrajectory {}\n",
                    report.max_violation(),
                    paths.report.display(),
                    paths.trajectory.display()
                ),
            )?;
            if let Some(a) = report.first_failure() {
                return Err(CliError::Assertion {
                    name: a.name.clone(),
                    value: a.value,
                    bound: a.bound,
                    max_violation: report.max_violation(),
                });
            }
            Ok(())
        }
        Command::Report { path, data } => {
            let summary = summarize(path)?;
            print(out, &summary.text)?;
            if let Some(p) = data {
                let mut w = create_output(p, cli.force)?;
                w.write_all(summary.columns.as_bytes())
                    .and_then(|_| w.flush())
                    .map_err(|source| CliError::Write { path: p.clone(), source })?;
            }
            Ok(())
        }
        Command::Verify { trajectory, config } => {
            let loaded = LoadedConfig::load(config)?;
            let (summary, assertions, _) = verify_file(trajectory, &loaded, opts)?;
            let max_violation = summary.max_violation.max(summary.mvs_max_violation.unwrap_or(0.0));
            let json = serde_json::json!({ "verify": summary, "assertions": assertions });
            print(out, &format!("{}\n", serde_json::to_string_pretty(&json).expect("summaries serialize")))?;
            if let Some(a) = assertions.iter().find(|a| !a.passed) {
                return Err(CliError::Assertion { name: a.name.clone(), value: a.value, bound: a.bound, max_violation });
            }
            Ok(())
        }
        Command::Convert { trajectory, to, block, output } => {
            let target = match to {
                Target::Measure => ConvertTarget::Measure,
                Target::Varifold => ConvertTarget::Varifold,
            };
            let path = convert(trajectory, target, *block, output.as_deref(), cli.force)?;
            print(out, &format!("wrote {}\n", path.display()))
        }
    }
}

/// Parses `args` (program name first), runs the verb and returns the exit code.
pub fn main_with_args<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
