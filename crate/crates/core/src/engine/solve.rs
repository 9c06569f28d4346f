//! The order-by-order sweep.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use super::machine::Machine;
use super::plan::{plan_with, RecurrencePlan};
use super::spec::{FracOrder, ProblemSpec};
use super::{PlanError, SchemaError, SolveError};
use crate::expr::TransformError;
use crate::series::{SeriesError, TruncSeries};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 50;
const FD_STEP: f64 = 1e-7;
/// Largest lower-order constraint coefficient tolerated in the initial data.
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub name: String,
    pub indep_var: String,
    /// Truncation order `N` in the independent variable.
    pub order: usize,
    pub grid: u32,
    pub alpha: Option<FracOrder>,
    /// Solved series in declaration order, each with `N q + 1` coefficients.
    pub series: Vec<(String, TruncSeries)>,
    pub plan: RecurrencePlan,
    /// Newton iterations spent at each grid order.
    pub newton_iterations: Vec<usize>,
    /// Transformed constraint coefficients `0..=N q`, one row per constraint.
    pub constraint_coefficients: Vec<Vec<f64>>,
    pub max_constraint_residual: f64,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn get(&self, id: &str) -> Option<&TruncSeries> {
        self.series.iter().find(|(n, _)| n == id).map(|(_, s)| s)
    }

    pub fn value(&self, id: &str, v: f64) -> Option<Result<f64, SeriesError>> {
        self.get(id).map(|s| s.evaluate(v))
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Sweep<'a> {
    m: &'a mut Machine,
    /// (constraint, shift) per algebraic slot.
    bindings: Vec<(usize, usize)>,
    reach: Option<usize>,
}

impl Sweep<'_> {
    /// Constraint residuals at order `k` with `U(k) = x` and later
    /// algebraic coefficients zero.
    fn residual(&mut self, k: usize, x: &[f64]) -> Result<Vec<f64>, TransformError> {
        for (a, xi) in self.m.algs.iter().zip(x) {
            self.m.env[a.slot][k] = *xi;
        }
        self.m.tape.truncate_state(k);
        if let Some(reach) = self.reach {
            self.m.propagate(k, k + reach)?;
        }
        let mut r = Vec::with_capacity(x.len());
        for &(c, s) in &self.bindings {
            r.push(self.m.constraint(c, k + s)?);
        }
        Ok(r)
    }

    fn state_size(&self, k: usize) -> f64 {
        let reach = k + self.reach.unwrap_or(0);
        self.m
            .env
            .iter()
            .map(|s| max_abs(&s[k.min(s.len())..(reach + 1).min(s.len())]))
            .fold(0.0, f64::max)
    }

    fn jacobian(&mut self, k: usize, x: &[f64]) -> Result<DMatrix<f64>, TransformError> {
        let n = x.len();
        let mut jac = DMatrix::zeros(n, n);
        let mut xt = x.to_vec();
        for j in 0..n {
            let h = FD_STEP * x[j].abs().max(1.0);
            xt[j] = x[j] + h;
            let plus = self.residual(k, &xt)?;
            xt[j] = x[j] - h;
            let minus = self.residual(k, &xt)?;
            xt[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Damped Newton with backtracking; returns the root and iteration count.
    fn newton(&mut self, k: usize, x0: Vec<f64>) -> Result<(Vec<f64>, usize), SolveError> {
        let mut x = x0;
        let mut r = self.residual(k, &x)?;
        let mut rn = max_abs(&r);
        for iter in 1..=NEWTON_MAX_ITER {
            let jac = self.jacobian(k, &x)?;
            let jac_norm = jac.abs().row_sum().max();
            let rhs = -DVector::from_column_slice(&r);
            let delta = jac
                .lu()
                .solve(&rhs)
                .filter(|d| d.iter().all(|v| v.is_finite()))
                .ok_or(SolveError::SingularJacobian { order: k })?;
            let mut t = 1.0;
            let (xt, rt) = loop {
                let xt: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
                let rt = self.residual(k, &xt)?;
                if max_abs(&rt) <= rn || t < 1.0 / 1024.0 {
                    break (xt, rt);
                }
                t *= 0.5;
            };
            let step = t * delta.amax();
            let scale = max_abs(&xt).max(1.0);
            // residuals carry rounding from terms as large as |J| |x| and the
            // differential coefficients already fixed at this order
            let size = (jac_norm * scale).max(self.state_size(k)).max(1.0);
            x = xt;
            r = rt;
            rn = max_abs(&r);
            if rn <= NEWTON_TOL * size && step <= 1e-10 * scale {
                return Ok((x, iter));
            }
            if step <= 4.0 * f64::EPSILON * scale {
                if rn <= 1e-10 * size {
                    return Ok((x, iter));
                }
                break;
            }
        }
        Err(SolveError::Newton {
            order: k,
            iterations: NEWTON_MAX_ITER,
            residual: rn,
        })
    }
}

pub fn solve(spec: &ProblemSpec) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let mut m = Machine::compile(spec).map_err(PlanError::from)?;
    let plan = plan_with(spec, &mut m)?;
    let grid = m.grid;
    let ng = spec.order * grid as usize;
    let smax = plan.max_shift();
    let (dmin, dmax) = (m.min_shift(), m.max_shift());
    m.reset(ng + smax + dmax + 2);

    let bindings: Vec<(usize, usize)> = m
        .algs
        .iter()
        .map(|a| {
            let b = plan
                .binding(&spec.variables[a.slot].id)
                .expect("every algebraic variable is bound");
            (b.constraint, b.shift)
        })
        .collect();
    let guesses: Vec<f64> = m.algs.iter().map(|a| a.guess).collect();
    let mut sweep = Sweep {
        m: &mut m,
        bindings,
        reach: smax.checked_sub(dmin),
    };

    let mut iterations = Vec::with_capacity(ng + 1);
    let mut x = guesses;
    for k in 0..=ng {
        let (root, iters) = if x.is_empty() { (x, 0) } else { sweep.newton(k, x)? };
        // leave the state at the accepted root and advance by RHS(k)
        sweep.residual(k, &root)?;
        sweep.m.propagate(k, k)?;
        iterations.push(iters);
        x = root;
    }
    let bindings = sweep.bindings;

    m.tape.truncate_state(ng + 1);
    let mut constraint_coefficients = Vec::new();
    for c in 0..m.constraints.len() {
        let row = (0..=ng).map(|j| m.constraint(c, j)).collect::<Result<Vec<_>, _>>()?;
        constraint_coefficients.push(row);
    }
    for &(c, s) in &bindings {
        for (j, &value) in constraint_coefficients[c].iter().enumerate().take(s) {
            if value.abs() > CONSISTENCY_TOL {
                return Err(SolveError::InconsistentInitialData {
                    constraint: c,
                    order: j,
                    residual: value,
                });
            }
        }
    }
    let max_constraint_residual = constraint_coefficients
        .iter()
        .map(|row| max_abs(row))
        .fold(0.0, f64::max);

    let series = spec
        .variables
        .iter()
        .enumerate()
        .map(|(slot, var)| {
            TruncSeries::new(m.env[slot][..=ng].to_vec(), spec.expansion_point, grid)
                .map(|s| (var.id.clone(), s))
                .map_err(|_| TransformError::NonFinite {
                    func: "solution",
                    center: spec.expansion_point,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(SolveReport {
        name: spec.name.clone(),
        indep_var: spec.indep_var.clone(),
        order: spec.order,
        grid,
        alpha: spec.effective_alpha(),
        series,
        plan,
        newton_iterations: iterations,
        constraint_coefficients,
        max_constraint_residual,
        wall_time: start.elapsed(),
    })
}

/// Solves with the problem's fractional derivatives set to order `alpha`.
pub fn solve_fractional(spec: &ProblemSpec, alpha: FracOrder) -> Result<SolveReport, SolveError> {
    if !spec.uses_alpha() {
        return Err(PlanError::from(SchemaError::Invalid("problem has no fractional derivative".into())).into());
    }
    solve(&spec.clone().with_alpha(alpha))
}

/// Largest absolute constraint value over `grid`, using the solved series.
pub fn verify_constraints(report: &SolveReport, spec: &ProblemSpec, grid: &[f64]) -> Result<f64, SolveError> {
    let mut worst: f64 = 0.0;
    for &v in grid {
        let mut values = Vec::with_capacity(report.series.len());
        for (name, s) in &report.series {
            let x = s.evaluate(v)?;
            values.push((name.as_str(), x));
        }
        let lookup = |name: &str| values.iter().find(|(n, _)| *n == name).map(|(_, x)| *x);
        for c in &spec.constraints {
            worst = worst.max(c.eval_with_definitions(v, &spec.definitions, &lookup)?.abs());
        }
    }
    Ok(worst)
}
