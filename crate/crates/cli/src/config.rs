//! Command-line arguments and their validation into a run configuration.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dae_dtm::engine::{FracOrder, FractionalRule, ProblemSpec, SchemaError, SolveError};
use dae_dtm::problems::{get_example_with, grid_points, ExampleParams, ProblemError, EXAMPLE_COUNT};
use thiserror::Error;

use crate::report::Format;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid orders: {0}")]
    Orders(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Problem(ProblemError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl From<ProblemError> for ConfigError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Schema(s) => ConfigError::Schema(s),
            other => ConfigError::Problem(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    CaputoGrid,
    IntegerIndex,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["example", "spec"]))]
pub struct SolveArgs {
    /// Built-in example number.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=EXAMPLE_COUNT as i64))]
    pub example: Option<u32>,
    /// Problem description in JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Truncation orders, comma separated; defaults to the problem's own.
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<usize>,
    /// Evaluation grid `start:stop:step`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Fractional derivative order, `p/q` or a decimal.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Coupling parameter of example 3.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Transform rule for fractional derivatives.
    #[arg(long, value_enum)]
    pub fractional_rule: Option<RuleArg>,
    #[arg(long, value_enum, default_value = "md")]
    pub format: Format,
    /// Output file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also evaluate every constraint on the grid with the solved series.
    #[arg(long)]
    pub check_constraints: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=EXAMPLE_COUNT as i64))]
    pub example: u32,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub orders: Vec<usize>,
    pub grid: Vec<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub check_constraints: bool,
}

/// `a:b:h` with `h > 0` and `b >= a`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, h] = parts.as_slice() else {
        return Err(ConfigError::Grid(format!("`{text}` is not start:stop:step")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ConfigError::Grid(format!("`{s}` is not a number")))
    };
    let (a, b, h) = (num(a)?, num(b)?, num(h)?);
    if h <= 0.0 {
        return Err(ConfigError::Grid("step must be positive".into()));
    }
    if b < a {
        return Err(ConfigError::Grid("stop must not be below start".into()));
    }
    Ok(grid_points(a, b, h))
}

fn params(alpha: Option<&str>, lambda: Option<f64>) -> Result<ExampleParams, ConfigError> {
    Ok(ExampleParams {
        lambda,
        alpha: alpha.map(FracOrder::parse).transpose()?,
    })
}

pub fn export(args: ExportArgs) -> Result<(String, Option<PathBuf>), ConfigError> {
    let case = get_example_with(args.example, params(args.alpha.as_deref(), args.lambda)?)?;
    Ok((case.spec.to_json() + "\n", args.out))
}

impl RunConfig {
    pub fn from_args(args: SolveArgs) -> Result<Self, ConfigError> {
        let (mut spec, default_orders, default_grid) = match (args.example, &args.spec) {
            (Some(n), _) => {
                let case = get_example_with(n, params(args.alpha.as_deref(), args.lambda)?)?;
                let grid = case.grid_points();
                (case.spec, case.default_orders, grid)
            }
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
                let mut spec = ProblemSpec::from_json(&text)?;
                if args.lambda.is_some() {
                    return Err(ConfigError::Usage("--lambda applies to example 3 only".into()));
                }
                if let Some(alpha) = args.alpha.as_deref() {
                    let alpha = FracOrder::parse(alpha)?;
                    if !spec.uses_alpha() {
                        return Err(SchemaError::Invalid("--alpha needs a fractional derivative".into()).into());
                    }
                    if spec.alpha != Some(alpha) && !alpha.is_one() {
                        // closed forms in the file describe a different order
                        spec.exact.clear();
                    }
                    spec = spec.with_alpha(alpha);
                }
                let v0 = spec.expansion_point;
                let order = spec.order;
                (spec, vec![order], grid_points(v0 + 0.1, v0 + 0.9, 0.1))
            }
            (None, None) => unreachable!("clap requires a problem source"),
        };
        if let Some(rule) = args.fractional_rule {
            spec = spec.with_fractional_rule(match rule {
                RuleArg::CaputoGrid => FractionalRule::CaputoGrid,
                RuleArg::IntegerIndex => FractionalRule::IntegerIndex,
            });
        }
        let orders = if args.order.is_empty() {
            default_orders
        } else {
            args.order
        };
        if orders.contains(&0) {
            return Err(ConfigError::Orders("each order must be at least 1".into()));
        }
        let grid = match &args.grid {
            Some(g) => parse_grid(g)?,
            None => default_grid,
        };
        Ok(Self {
            spec,
            orders,
            grid,
            format: args.format,
            out: args.out,
            check_constraints: args.check_constraints,
        })
    }

    pub fn exact_value(&self, var: &str, v: f64) -> Option<f64> {
        let e = self.spec.exact.get(var)?;
        e.eval_with_definitions(v, &self.spec.definitions, &|_| None).ok()
    }
}
