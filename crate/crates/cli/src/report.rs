//! Markdown, CSV and JSON renderings of solved runs.

use std::fmt::Write;

use clap::ValueEnum;
use dae_dtm::engine::{FractionalRule, SolveReport};
use dae_dtm::metrics::ErrorReport;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Md,
    Csv,
    Json,
}

pub struct Run {
    pub report: SolveReport,
    pub errors: ErrorReport,
    pub grid_residual: Option<f64>,
}

/// `digits` significant figures, fixed notation for moderate magnitudes.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..10).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        scientific(x, digits)
    }
}

/// `3.7E-08` style with `digits` significant figures.
pub fn scientific(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn rule_note(cfg: &RunConfig) -> Option<String> {
    let alpha = cfg.spec.effective_alpha()?;
    let rule = match cfg.spec.fractional_rule {
        FractionalRule::CaputoGrid => "Caputo grid",
        FractionalRule::IntegerIndex => "integer index",
    };
    Some(format!("alpha = {alpha} ({rule} rule)"))
}

pub fn markdown(cfg: &RunConfig, runs: &[Run]) -> String {
    let mut out = String::new();
    let indep = &cfg.spec.indep_var;
    let _ = writeln!(out, "# {}\n", cfg.spec.name);
    if let Some(note) = rule_note(cfg) {
        let _ = writeln!(out, "{note}\n");
    }
    for run in runs {
        let _ = writeln!(out, "## N = {}\n", run.report.order);
        for var in &run.errors.variables {
            let _ = writeln!(out, "### {}\n", var.var);
            let with_exact = var.max_abs.is_some();
            if with_exact {
                let _ = writeln!(out, "| {indep} | exact | approx | E_N | R_N |\n|---|---|---|---|---|");
            } else {
                let _ = writeln!(out, "| {indep} | approx |\n|---|---|");
            }
            for row in &var.rows {
                let approx = significant(row.approx, 10);
                match (row.exact, row.abs_error) {
                    (Some(exact), Some(e)) if with_exact => {
                        let rel = row.rel_error.map_or("-".into(), |r| scientific(r, 2));
                        let _ = writeln!(
                            out,
                            "| {:?} | {} | {approx} | {} | {rel} |",
                            row.v,
                            significant(exact, 10),
                            scientific(e, 2)
                        );
                    }
                    _ => {
                        let _ = writeln!(out, "| {:?} | {approx} |", row.v);
                    }
                }
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "Largest transformed constraint coefficient: {}",
            scientific(run.report.max_constraint_residual, 2)
        );
        if let Some(r) = run.grid_residual {
            let _ = writeln!(out, "\nLargest constraint residual on the grid: {}", scientific(r, 2));
        }
        out.push('\n');
    }

    let vars: Vec<&str> = runs
        .first()
        .map(|r| {
            r.errors
                .variables
                .iter()
                .filter(|v| v.max_abs.is_some())
                .map(|v| v.var.as_str())
                .collect()
        })
        .unwrap_or_default();
    if !vars.is_empty() {
        let _ = writeln!(out, "## Maximum absolute error\n");
        let _ = writeln!(out, "| N | {} |", vars.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(vars.len()));
        for run in runs {
            let cells: Vec<String> = vars
                .iter()
                .map(|v| {
                    run.errors
                        .variable(v)
                        .and_then(|e| e.max_abs)
                        .map_or("-".into(), |m| scientific(m, 2))
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", run.report.order, cells.join(" | "));
        }
    }
    out
}

pub fn csv(runs: &[Run]) -> String {
    let opt = |x: Option<f64>| x.map(full).unwrap_or_default();
    let mut out = String::from("kind,order,var,v,exact,approx,abs_error,rel_error\n");
    for run in runs {
        let n = run.report.order;
        for var in &run.errors.variables {
            for row in &var.rows {
                let _ = writeln!(
                    out,
                    "point,{n},{},{},{},{},{},{}",
                    var.var,
                    full(row.v),
                    opt(row.exact),
                    full(row.approx),
                    opt(row.abs_error),
                    opt(row.rel_error)
                );
            }
            if let Some(m) = var.max_abs {
                let _ = writeln!(out, "max,{n},{},,,,{},", var.var, full(m));
            }
        }
    }
    out
}

#[derive(Serialize)]
struct JsonRow {
    v: f64,
    exact: Option<f64>,
    approx: f64,
    abs_error: Option<f64>,
    rel_error: Option<f64>,
}

#[derive(Serialize)]
struct JsonVariable<'a> {
    id: &'a str,
    coefficients: &'a [f64],
    rows: Vec<JsonRow>,
    max_error: Option<f64>,
}

#[derive(Serialize)]
struct JsonRun<'a> {
    order: usize,
    grid_denominator: u32,
    alpha: Option<String>,
    newton_iterations: usize,
    max_constraint_coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_constraint_residual: Option<f64>,
    variables: Vec<JsonVariable<'a>>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    problem: &'a str,
    indep_var: &'a str,
    expansion_point: f64,
    fractional_rule: FractionalRule,
    grid: &'a [f64],
    runs: Vec<JsonRun<'a>>,
}

pub fn json(cfg: &RunConfig, runs: &[Run]) -> String {
    let report = JsonReport {
        problem: &cfg.spec.name,
        indep_var: &cfg.spec.indep_var,
        expansion_point: cfg.spec.expansion_point,
        fractional_rule: cfg.spec.fractional_rule,
        grid: &cfg.grid,
        runs: runs
            .iter()
            .map(|run| JsonRun {
                order: run.report.order,
                grid_denominator: run.report.grid,
                alpha: run.report.alpha.map(|a| a.to_string()),
                newton_iterations: run.report.newton_iterations.iter().sum(),
                max_constraint_coefficient: run.report.max_constraint_residual,
                grid_constraint_residual: run.grid_residual,
                variables: run
                    .errors
                    .variables
                    .iter()
                    .map(|var| JsonVariable {
                        id: &var.var,
                        coefficients: run.report.get(&var.var).map_or(&[], |s| s.coeffs()),
                        rows: var
                            .rows
                            .iter()
                            .map(|r| JsonRow {
                                v: r.v,
                                exact: r.exact,
                                approx: r.approx,
                                abs_error: r.abs_error,
                                rel_error: r.rel_error,
                            })
                            .collect(),
                        max_error: var.max_abs,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
}
