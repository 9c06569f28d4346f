//! Absolute, maximum and relative errors of truncated solutions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::SolveReport;
use crate::series::{SeriesError, TruncSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("maximum error needs a non-empty grid")]
    EmptyGrid,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `E_N(v) = |w(v) - w_N(v)|`.
pub fn absolute_error(exact: impl Fn(f64) -> f64, approx: &TruncSeries, v: f64) -> Result<f64, SeriesError> {
    Ok((exact(v) - approx.evaluate(v)?).abs())
}

/// `max_v E_N(v)` over `grid`.
pub fn max_error(exact: impl Fn(f64) -> f64, approx: &TruncSeries, grid: &[f64]) -> Result<f64, MetricsError> {
    if grid.is_empty() {
        return Err(MetricsError::EmptyGrid);
    }
    let mut worst: f64 = 0.0;
    for &v in grid {
        worst = worst.max(absolute_error(&exact, approx, v)?);
    }
    Ok(worst)
}

/// `R_N(v) = E_N(v) / |w(v)|`; `None` where the exact value is zero.
pub fn relative_error(exact: impl Fn(f64) -> f64, approx: &TruncSeries, v: f64) -> Result<Option<f64>, SeriesError> {
    let w = exact(v);
    let e = (w - approx.evaluate(v)?).abs();
    Ok((w != 0.0).then(|| e / w.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub v: f64,
    pub exact: Option<f64>,
    pub approx: f64,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableErrors {
    pub var: String,
    pub rows: Vec<ErrorRow>,
    /// Largest tabulated absolute error; `None` without an exact solution.
    pub max_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub order: usize,
    pub grid: Vec<f64>,
    pub variables: Vec<VariableErrors>,
}

impl ErrorReport {
    /// Tabulates every solved variable on `grid`; `exact(var, v)` supplies the
    /// closed form where one exists.
    pub fn build(
        report: &SolveReport,
        exact: &dyn Fn(&str, f64) -> Option<f64>,
        grid: &[f64],
    ) -> Result<Self, MetricsError> {
        if grid.is_empty() {
            return Err(MetricsError::EmptyGrid);
        }
        let mut variables = Vec::new();
        for (var, series) in &report.series {
            let mut rows = Vec::with_capacity(grid.len());
            for &v in grid {
                let approx = series.evaluate(v)?;
                let w = exact(var, v);
                let abs_error = w.map(|w| (w - approx).abs());
                let rel_error = match (w, abs_error) {
                    (Some(w), Some(e)) if w != 0.0 => Some(e / w.abs()),
                    _ => None,
                };
                rows.push(ErrorRow {
                    v,
                    exact: w,
                    approx,
                    abs_error,
                    rel_error,
                });
            }
            let max_abs = rows
                .iter()
                .map(|r| r.abs_error)
                .try_fold(0.0f64, |m, e| e.map(|e| m.max(e)));
            variables.push(VariableErrors {
                var: var.clone(),
                rows,
                max_abs,
            });
        }
        Ok(Self {
            order: report.order,
            grid: grid.to_vec(),
            variables,
        })
    }

    pub fn variable(&self, var: &str) -> Option<&VariableErrors> {
        self.variables.iter().find(|v| v.var == var)
    }
}

/// Maximum error per variable as a function of `N`, in the order given.
pub fn convergence_trend(reports: &[ErrorReport]) -> BTreeMap<String, Vec<(usize, f64)>> {
    let mut out: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for r in reports {
        for v in &r.variables {
            if let Some(m) = v.max_abs {
                out.entry(v.var.clone()).or_default().push((r.order, m));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp_series(n: usize) -> TruncSeries {
        TruncSeries::dt_exp_forcing(1.0, n)
    }

    #[test]
    fn exact_approximation_has_no_error() {
        let s = TruncSeries::taylor(vec![1.0, 2.0, 3.0]).unwrap();
        let f = |v: f64| 1.0 + 2.0 * v + 3.0 * v * v;
        assert_eq!(absolute_error(f, &s, 0.3).unwrap(), 0.0);
        assert_eq!(relative_error(f, &s, 0.3).unwrap(), Some(0.0));
    }

    #[test]
    fn zero_exact_value_has_no_relative_error() {
        let s = TruncSeries::taylor(vec![0.0, 1.0]).unwrap();
        assert_eq!(relative_error(|_| 0.0, &s, 0.5).unwrap(), None);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert_eq!(max_error(f64::exp, &exp_series(4), &[]), Err(MetricsError::EmptyGrid));
    }

    #[test]
    fn max_error_of_truncated_exponential() {
        let grid = [0.25, 0.5, 1.0];
        let m = max_error(f64::exp, &exp_series(5), &grid).unwrap();
        let tail: f64 = (6..30).map(|k| 1.0 / (1..=k).map(|i| i as f64).product::<f64>()).sum();
        assert!((m - tail).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn scaling_is_equivariant(c in 0.1f64..10.0, v in 0.0f64..1.0) {
            let s = exp_series(6);
            let e = absolute_error(f64::exp, &s, v).unwrap();
            let es = absolute_error(|x| c * x.exp(), &s.scale(c), v).unwrap();
            prop_assert!((es - c * e).abs() <= 1e-12 * (1.0 + es));
            let r = relative_error(f64::exp, &s, v).unwrap().unwrap();
            let rs = relative_error(|x| c * x.exp(), &s.scale(c), v).unwrap().unwrap();
            prop_assert!((r - rs).abs() <= 1e-12 * (1.0 + r) + 1e-15);
        }

        #[test]
        fn relative_times_exact_is_absolute(v in 0.0f64..1.0) {
            let s = exp_series(4);
            let e = absolute_error(f64::exp, &s, v).unwrap();
            let r = relative_error(f64::exp, &s, v).unwrap().unwrap();
            prop_assert!((r * v.exp() - e).abs() <= 1e-15 * (1.0 + e));
        }
    }
}
