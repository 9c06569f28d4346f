//! `dae-dtm`: solve built-in or JSON-described DAEs by the differential
//! transform and tabulate values and errors.

mod config;
mod report;

use std::fs;
use std::io::Write;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};
use dae_dtm::engine::{solve, verify_constraints, PlanError, SolveError};
use dae_dtm::expr::TransformError;
use dae_dtm::metrics::ErrorReport;

use config::{ConfigError, ExportArgs, RunConfig, SolveArgs};
use report::{Format, Run};

#[derive(Parser)]
#[command(
    name = "dae-dtm",
    version,
    about = "Differential transform solver for nonlinear and fractional DAEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one or more truncation orders and print value/error tables.
    Solve(SolveArgs),
    /// Print a built-in example as a problem description.
    Export(ExportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => RunConfig::from_args(args).and_then(run),
        Command::Export(args) => config::export(args).and_then(|(text, out)| emit(&text, out.as_deref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn emit(text: &str, out: Option<&std::path::Path>) -> Result<(), ConfigError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| ConfigError::Io(path.display().to_string(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            // a closed pipe is not worth an error status
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn solve_one(cfg: &RunConfig, order: usize) -> Result<Run, ConfigError> {
    let spec = cfg.spec.clone().with_order(order);
    let solved = solve(&spec)?;
    let exact = |var: &str, v: f64| cfg.exact_value(var, v);
    let errors = ErrorReport::build(&solved, &exact, &cfg.grid).map_err(|e| match e {
        dae_dtm::metrics::MetricsError::Series(s) => ConfigError::Solve(SolveError::Series(s)),
        other => ConfigError::Grid(other.to_string()),
    })?;
    let grid_residual = if cfg.check_constraints {
        Some(verify_constraints(&solved, &spec, &cfg.grid)?)
    } else {
        None
    };
    Ok(Run {
        report: solved,
        errors,
        grid_residual,
    })
}

fn run(cfg: RunConfig) -> Result<(), ConfigError> {
    let results: Vec<Result<Run, ConfigError>> = thread::scope(|s| {
        let cfg = &cfg;
        let handles: Vec<_> = cfg.orders.iter().map(|&n| s.spawn(move || solve_one(cfg, n))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    for r in &runs {
        eprintln!(
            "N = {}: solved in {:.3} ms",
            r.report.order,
            r.report.wall_time.as_secs_f64() * 1e3
        );
    }
    let text = match cfg.format {
        Format::Md => report::markdown(&cfg, &runs),
        Format::Csv => report::csv(&runs),
        Format::Json => report::json(&cfg, &runs),
    };
    emit(&text, cfg.out.as_deref())
}

impl ConfigError {
    fn exit_code(&self) -> u8 {
        match self {
            ConfigError::Io(..)
            | ConfigError::Grid(_)
            | ConfigError::Orders(_)
            | ConfigError::Usage(_)
            | ConfigError::Problem(_) => 2,
            ConfigError::Schema(_) => 3,
            ConfigError::Solve(e) => match e {
                SolveError::Plan(PlanError::Schema(_)) | SolveError::InconsistentInitialData { .. } => 3,
                SolveError::Plan(PlanError::IndexTooHigh { .. } | PlanError::Cyclic { .. }) => 4,
                SolveError::Plan(PlanError::Transform(
                    TransformError::UnknownVariable(_) | TransformError::RecursiveDefinition(_),
                )) => 3,
                _ => 5,
            },
        }
    }
}
