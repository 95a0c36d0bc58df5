//! `binding-bench`: batch front end for the binding-energy benchmarks.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use binding_core::report::{
    error_record, exit_code, load_potential, parse_list, parse_mode_arg, resolve_mode_arg, run,
    Command, RunConfig, SolverConfig,
};
use binding_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "binding-bench",
    version,
    about = "Binding-energy expansion benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Closed-form coefficients on one mode set.
    Coeffs(Shared),
    /// Coefficients on balls of increasing cutoff, with a tail fit.
    Series(Shared),
    /// E₂ᵇ of a gaussian under the rescaling v̂(k/Λ).
    Scaling(Shared),
    /// Perturbation engine against the closed forms over an n_max sweep.
    RsCheck(Shared),
    /// Exact diagonalization and polynomial fit of ΔE(N).
    OracleFit(Shared),
    /// Executes a serialized run configuration.
    Run {
        /// JSON file holding a run configuration.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Shared {
    /// Potential as inline JSON or a file path.
    #[arg(long)]
    potential: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Comma-separated ball cutoffs in physical momentum units.
    #[arg(long)]
    cutoffs: Option<String>,
    /// `ball:R` or `list:PATH`.
    #[arg(long)]
    modes: Option<String>,
    /// Comma-separated particle numbers.
    #[arg(long = "N-list")]
    n_list: Option<String>,
    /// Comma-separated excitation truncations.
    #[arg(long)]
    nmax_sweep: Option<String>,
    /// Comma-separated scales Λ for v̂(k/Λ).
    #[arg(long)]
    lambda_scale: Option<String>,
    #[arg(long, default_value_t = 2)]
    order: u32,
    /// Ball radius of the scaling probe in units of the potential width.
    #[arg(long, default_value_t = 2.5)]
    cutoff_factor: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Omit wall-clock fields so repeated runs are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// Diagonalize in every momentum sector.
    #[arg(long)]
    full_space: bool,
    /// Dimension up to which eigenproblems are solved densely.
    #[arg(long)]
    dense_threshold: Option<usize>,
}

fn list<T>(s: &Option<String>, field: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.as_deref()
        .map_or(Ok(Vec::new()), |v| parse_list(v, field))
}

fn build_config(command: Command, a: &Shared) -> Result<RunConfig> {
    let mut solver = SolverConfig::default();
    if let Some(d) = a.dense_threshold {
        solver.dense_threshold = d;
    }
    let modes = match &a.modes {
        Some(m) => Some(resolve_mode_arg(&parse_mode_arg(m)?)?),
        None => None,
    };
    let config = RunConfig {
        command,
        potential: load_potential(&a.potential)?,
        dim: a.dim,
        modes,
        cutoffs: list(&a.cutoffs, "cutoffs")?,
        lambda_scales: list(&a.lambda_scale, "lambda_scale")?,
        n_list: list(&a.n_list, "N_list")?,
        nmax_sweep: list(&a.nmax_sweep, "nmax_sweep")?,
        order: a.order,
        cutoff_factor: a.cutoff_factor,
        out_dir: a.out.clone(),
        workers: a.workers,
        deterministic: a.deterministic,
        full_space: a.full_space,
        solver,
    };
    config.validate()?;
    Ok(config)
}

fn resolve(cmd: &Cmd) -> Result<RunConfig> {
    match cmd {
        Cmd::Coeffs(a) => build_config(Command::Coeffs, a),
        Cmd::Series(a) => build_config(Command::Series, a),
        Cmd::Scaling(a) => build_config(Command::Scaling, a),
        Cmd::RsCheck(a) => build_config(Command::RsCheck, a),
        Cmd::OracleFit(a) => build_config(Command::OracleFit, a),
        Cmd::Run { config } => RunConfig::from_json(&fs::read_to_string(config)?),
    }
}

fn out_dir(cmd: &Cmd) -> Option<PathBuf> {
    match cmd {
        Cmd::Coeffs(a) | Cmd::Series(a) | Cmd::Scaling(a) | Cmd::RsCheck(a) | Cmd::OracleFit(a) => {
            Some(a.out.clone())
        }
        Cmd::Run { .. } => None,
    }
}

fn report_error(e: &Error, dir: Option<PathBuf>) -> ExitCode {
    let rec = error_record(e);
    eprintln!("{rec}");
    if let Some(d) = dir {
        if fs::create_dir_all(&d).is_ok() {
            let _ = fs::write(d.join("error.json"), format!("{rec}\n"));
        }
    }
    ExitCode::from(exit_code(e) as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => return report_error(&e, out_dir(&cli.command)),
    };
    match run(&config) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string(&summary).expect("summary always serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => report_error(&e, Some(config.out_dir.clone())),
    }
}
