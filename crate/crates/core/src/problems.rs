//! Built-in example problems with closed-form solutions and reference
//! values.

use std::collections::BTreeMap;

use serde_json::json;
use thiserror::Error;

use crate::engine::{DiffOrder, FracOrder, ProblemSpec, SchemaError, VarKind};
use crate::expr::{Expr, TransformError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("no built-in example {0}; choose 1 to 5")]
    OutOfRange(u32),
    #[error("parameter `{0}` does not apply to example {1}")]
    UnusedParameter(&'static str, u32),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Kind of a reference number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Truncated-series value `w_N(v)`.
    Approx,
    /// Relative error `R_N(v)`.
    Relative,
    /// Maximum absolute error over the default grid.
    MaxAbs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub quantity: Quantity,
    pub var: &'static str,
    pub order: usize,
    /// Grid point; `None` for grid maxima.
    pub v: Option<f64>,
    /// Fractional order the value belongs to, when not 1.
    pub alpha: Option<(u32, u32)>,
    pub value: f64,
}

/// Overrides for the parameterized examples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExampleParams {
    /// Example 3's coupling parameter (default 15).
    pub lambda: Option<f64>,
    /// Example 5's derivative order (default 1).
    pub alpha: Option<FracOrder>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleCase {
    pub number: u32,
    pub spec: ProblemSpec,
    /// Closed-form solutions. For example 5 they hold at order 1 only.
    pub exact: BTreeMap<String, Expr>,
    pub default_orders: Vec<usize>,
    /// `(start, stop, step)`.
    pub default_grid: (f64, f64, f64),
    pub reference: Vec<Reference>,
}

pub const EXAMPLE_COUNT: u32 = 5;

pub fn get_example(n: u32) -> Result<ExampleCase, ProblemError> {
    get_example_with(n, ExampleParams::default())
}

pub fn get_example_with(n: u32, params: ExampleParams) -> Result<ExampleCase, ProblemError> {
    if params.lambda.is_some() && n != 3 {
        return Err(ProblemError::UnusedParameter("lambda", n));
    }
    if params.alpha.is_some() && n != 5 {
        return Err(ProblemError::UnusedParameter("alpha", n));
    }
    let (value, orders, grid, reference) = match n {
        1 => (example1(), vec![10, 15, 20], (0.1, 0.9, 0.1), refs1()),
        2 => (example2(), vec![5, 10, 15], (0.1, 0.9, 0.1), refs2()),
        3 => (
            example3(params.lambda.unwrap_or(15.0)),
            vec![5, 10, 12, 15],
            (0.1, 1.0, 0.1),
            refs3(),
        ),
        4 => (example4(), vec![10, 15, 20], (0.1, 1.0, 0.1), refs4()),
        5 => (
            example5(params.alpha.unwrap_or_else(FracOrder::one)),
            vec![10],
            (0.1, 1.0, 0.1),
            refs5(),
        ),
        _ => return Err(ProblemError::OutOfRange(n)),
    };
    let mut spec = ProblemSpec::from_value(value)?;
    let exact = spec.exact.clone();
    if spec.effective_alpha().is_some() {
        spec.exact.clear();
    }
    Ok(ExampleCase {
        number: n,
        spec,
        exact,
        default_orders: orders,
        default_grid: grid,
        reference,
    })
}

fn example1() -> serde_json::Value {
    json!({
        "name": "example 1: index-3 system with rational forcing",
        "indep_var": "v",
        "expansion_point": 0.0,
        "order": 20,
        "variables": [
            {"id": "w1", "kind": "differential", "deriv_order": 1, "initial": [0.0]},
            {"id": "w2", "kind": "differential", "deriv_order": 1, "initial": [0.0]},
            {"id": "w3", "kind": "differential", "deriv_order": 1, "initial": [0.5]},
            {"id": "w4", "kind": "differential", "deriv_order": 1, "initial": [-0.5]},
            {"id": "w", "kind": "algebraic"}
        ],
        "equations": [
            {"lhs": {"var": "w1", "order": 1}, "rhs": "2*w3"},
            {"lhs": {"var": "w2", "order": 1}, "rhs": "2*w4"},
            {"lhs": {"var": "w3", "order": 1}, "rhs": "-2*w3 + exp(w2) + w + phi1"},
            {"lhs": {"var": "w4", "order": 1}, "rhs": "2*w4 + exp(w1) + w + phi2"}
        ],
        "constraints": ["w1 + w2 - phi3"],
        "definitions": {
            "phi1": "-(2*v^4 + 2*v^3 + 1)/(2*(1 + v)^2)",
            "phi2": "(-2*v^4 + 2*v^3 - 1)/(2*(1 - v)^2)",
            "phi3": "ln(1 - v^2)"
        },
        "exact": {
            "w1": "ln(1 + v)",
            "w2": "ln(1 - v)",
            "w3": "1/(2*(1 + v))",
            "w4": "-1/(2*(1 - v))",
            "w": "v^2"
        }
    })
}

fn example2() -> serde_json::Value {
    json!({
        "name": "example 2: second-order system on the unit circle",
        "order": 15,
        "variables": [
            {"id": "w1", "kind": "differential", "deriv_order": 2, "initial": [1.0, 0.0]},
            {"id": "w2", "kind": "differential", "deriv_order": 2, "initial": [0.0, 1.0]},
            {"id": "w", "kind": "algebraic", "initial": [1.0]}
        ],
        "equations": [
            {"lhs": {"var": "w1", "order": 2}, "rhs": "2*w2 - 2*w2^3 - w1*w"},
            {"lhs": {"var": "w2", "order": 2}, "rhs": "2*w1 - 2*w1^3 - w2*w"}
        ],
        "constraints": ["w1^2 + w2^2 - 1"],
        "exact": {"w1": "cos(v)", "w2": "sin(v)", "w": "1 + sin(2*v)"}
    })
}

fn example3(lambda: f64) -> serde_json::Value {
    let l = format!("({lambda:?})");
    json!({
        "name": format!("example 3: index-2 system, lambda = {lambda}"),
        "order": 12,
        "variables": [
            {"id": "w1", "kind": "differential", "deriv_order": 1, "initial": [1.0]},
            {"id": "w2", "kind": "differential", "deriv_order": 1, "initial": [1.0]},
            {"id": "w3", "kind": "differential", "deriv_order": 1, "initial": [0.0]},
            {"id": "dw3", "kind": "algebraic"}
        ],
        "equations": [
            {"lhs": {"var": "w1", "order": 1},
             "rhs": format!("v*{l}*dw3 + exp(v) - v*{l}*(exp(v) + exp(-v))")},
            {"lhs": {"var": "w2", "order": 1},
             "rhs": format!("({l} - 5)*dw3 - exp(-v) - ({l} - 5)*(exp(v) + exp(-v))")},
            {"lhs": {"var": "w3", "order": 1}, "rhs": "dw3"}
        ],
        "constraints": ["v^2*w1 + w2*sin(v) - v^2*exp(v) - sin(v)*exp(-v)"],
        "exact": {
            "w1": "exp(v)",
            "w2": "exp(-v)",
            "w3": "exp(v) - exp(-v)",
            "dw3": "exp(v) + exp(-v)"
        }
    })
}

fn example4() -> serde_json::Value {
    json!({
        "name": "example 4: particle on a circular track",
        "order": 20,
        "variables": [
            {"id": "w1", "kind": "differential", "deriv_order": 2, "initial": [0.0, 0.0]},
            {"id": "w2", "kind": "differential", "deriv_order": 2, "initial": [1.0, 0.0]},
            {"id": "w3", "kind": "algebraic", "initial": [0.0]}
        ],
        "equations": [
            {"lhs": {"var": "w1", "order": 2}, "rhs": "2*w2 + w1*w3"},
            {"lhs": {"var": "w2", "order": 2}, "rhs": "-2*w1 + w2*w3"}
        ],
        "constraints": ["w1^2 + w2^2 - 1"],
        "exact": {"w1": "sin(v^2)", "w2": "cos(v^2)", "w3": "-4*v^2"}
    })
}

fn example5(alpha: FracOrder) -> serde_json::Value {
    json!({
        "name": format!("example 5: fractional system, alpha = {alpha}"),
        "order": 10,
        "alpha": alpha.to_string(),
        "variables": [
            {"id": "w1", "kind": "differential", "deriv_order": "alpha", "initial": [1.0]},
            {"id": "w2", "kind": "algebraic", "initial": [1.0]}
        ],
        "equations": [
            {"lhs": {"var": "w1", "order": "alpha"}, "rhs": "w2 + 2*exp(2*v) - sqrt(w1)"}
        ],
        "constraints": ["w1 - w2^2"],
        "exact": {"w1": "exp(2*v)", "w2": "exp(v)"}
    })
}

fn point(quantity: Quantity, var: &'static str, order: usize, v: f64, value: f64) -> Reference {
    Reference {
        quantity,
        var,
        order,
        v: Some(v),
        alpha: None,
        value,
    }
}

fn maxima(vars: &[&'static str], rows: &[(usize, &[f64])]) -> Vec<Reference> {
    let mut out = Vec::new();
    for (order, values) in rows {
        for (var, value) in vars.iter().zip(values.iter()) {
            out.push(Reference {
                quantity: Quantity::MaxAbs,
                var,
                order: *order,
                v: None,
                alpha: None,
                value: *value,
            });
        }
    }
    out
}

fn column(
    quantity: Quantity,
    var: &'static str,
    order: usize,
    alpha: Option<(u32, u32)>,
    values: &[f64],
) -> Vec<Reference> {
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| Reference {
            quantity,
            var,
            order,
            v: Some(0.1 * (i + 1) as f64),
            alpha,
            value,
        })
        .collect()
}

fn refs1() -> Vec<Reference> {
    let mut out = column(
        Quantity::Approx,
        "w1",
        20,
        None,
        &[
            0.0953101798,
            0.1823215568,
            0.2623642645,
            0.3364722365,
            0.4054650927,
            0.4700029649,
            0.5306123016,
            0.5875375291,
            0.6390499221,
        ],
    );
    out.extend(column(
        Quantity::Relative,
        "w1",
        20,
        None,
        &[
            7.2e-16, 3.0e-16, 1.4e-12, 4.5e-10, 3.7e-08, 1.4e-06, 3.0e-05, 4.2e-04, 4.3e-03,
        ],
    ));
    out.extend(maxima(
        &["w1", "w2", "w3", "w4"],
        &[
            (10, &[1.5e-02, 1.8e-01, 8.2e-02, 1.5]),
            (15, &[6.2e-03, 8.27e-02, 4.8e-02, 9.2e-01]),
            (20, &[2.8e-03, 3.9e-02, 2.8e-02, 5.4e-01]),
        ],
    ));
    out
}

fn refs2() -> Vec<Reference> {
    let mut out = column(
        Quantity::Approx,
        "w1",
        15,
        None,
        &[
            0.9950041000,
            0.9800671000,
            0.9553361000,
            0.9210611000,
            0.8775831000,
            0.8253361000,
            0.7648421000,
            0.6967071000,
            0.6216110000,
        ],
    );
    out.extend(column(
        Quantity::Approx,
        "w2",
        15,
        None,
        &[
            0.0998334100,
            0.1986691000,
            0.2955210000,
            0.3894181000,
            0.4794261000,
            0.5646421000,
            0.6442181000,
            0.7173561000,
            0.7833271000,
        ],
    ));
    out.extend(column(
        Quantity::Approx,
        "w",
        15,
        None,
        &[
            1.1986710000,
            1.3894210000,
            1.5646410000,
            1.7173610000,
            1.8414710000,
            1.9320410000,
            1.9854510000,
            1.9995710000,
            1.9738510000,
        ],
    ));
    out.extend(maxima(
        &["w1", "w2", "w"],
        &[
            (5, &[7.2e-04, 9.3e-05, 1.1e-02]),
            (10, &[5.8e-10, 7.8e-09, 1.5e-05]),
            (15, &[8.7e-15, 4.4e-16, 6.0e-11]),
        ],
    ));
    out
}

// printed table digits, not the constant e
#[allow(clippy::approx_constant)]
fn refs3() -> Vec<Reference> {
    let mut out = vec![
        point(Quantity::Relative, "w1", 12, 1.0, 6.3e-11),
        point(Quantity::Relative, "w2", 12, 1.0, 4.0e-10),
        point(Quantity::Relative, "w3", 12, 1.0, 1.3e-10),
        point(Quantity::Approx, "w1", 12, 1.0, 2.718281828),
        point(Quantity::Approx, "w2", 12, 1.0, 0.367879441),
        point(Quantity::Approx, "w3", 12, 1.0, 2.350402387),
    ];
    out.extend(maxima(
        &["w1", "w2", "w3"],
        &[
            (5, &[9.9e-03, 1.2e-03, 4.0e-04]),
            (10, &[3.0e-07, 2.3e-08, 5.0e-08]),
            (15, &[8.1e-13, 7.1e-13, 5.7e-15]),
        ],
    ));
    out
}

fn refs4() -> Vec<Reference> {
    let mut out = column(
        Quantity::Approx,
        "w1",
        20,
        None,
        &[
            0.009999833,
            0.039989334,
            0.089878549,
            0.159318207,
            0.247403959,
            0.352274233,
            0.470625888,
            0.597195441,
            0.724287174,
            0.841470984,
        ],
    );
    out.extend(column(
        Quantity::Approx,
        "w2",
        20,
        None,
        &[
            0.999950000,
            0.999200107,
            0.995952733,
            0.987227283,
            0.968912422,
            0.935896824,
            0.882332859,
            0.802095755,
            0.689498433,
            0.540302306,
        ],
    ));
    out.push(point(Quantity::Relative, "w1", 20, 1.0, 2.9e-08));
    out.push(point(Quantity::Relative, "w2", 20, 1.0, 3.8e-09));
    out.extend(maxima(
        &["w1", "w2", "w3"],
        &[
            (10, &[4.4e-05, 3.8e-04, 0.0]),
            (15, &[2.7e-06, 2.7e-07, 0.0]),
            (20, &[2.4e-08, 2.0e-09, 0.0]),
        ],
    ));
    out
}

/// One printed column per fractional order, `None` meaning order 1.
type AlphaColumn = (Option<(u32, u32)>, [f64; 10]);

fn refs5() -> Vec<Reference> {
    let w1: [AlphaColumn; 4] = [
        (
            None,
            [
                1.221402758,
                1.491824698,
                1.822118800,
                2.225540926,
                2.718281801,
                3.320116716,
                4.055198820,
                4.953027348,
                6.049628566,
                7.388994709,
            ],
        ),
        (
            Some((9, 10)),
            [
                1.232592481,
                1.522000050,
                1.881442677,
                2.327166133,
                2.879128803,
                3.561843540,
                4.405409180,
                5.446773813,
                6.731280574,
                8.314556977,
            ],
        ),
        (
            Some((4, 5)),
            [
                1.242818926,
                1.550840020,
                1.939997843,
                2.429996427,
                3.045186405,
                3.815644105,
                4.778498484,
                5.979561723,
                7.475331043,
                9.335443038,
            ],
        ),
        (
            Some((7, 10)),
            [
                1.251760574,
                1.577528022,
                1.996283505,
                2.531647704,
                3.212987402,
                4.076781955,
                5.168309651,
                6.543727135,
                8.272630664,
                10.44120618,
            ],
        ),
    ];
    let w2: [AlphaColumn; 4] = [
        (
            None,
            [
                1.105170918,
                1.221402758,
                1.349858808,
                1.491824698,
                1.648721271,
                1.822118800,
                2.013752707,
                2.225540926,
                2.459603103,
                2.718281801,
            ],
        ),
        (
            Some((9, 10)),
            [
                1.110221816,
                1.233693661,
                1.371656910,
                1.525505211,
                1.696799638,
                1.887285142,
                2.098908983,
                2.333842138,
                2.594505315,
                2.883602243,
            ],
        ),
        (
            Some((4, 5)),
            [
                1.114817889,
                1.245327274,
                1.392838054,
                1.558844590,
                1.745046381,
                1.953368506,
                2.185984441,
                2.445345519,
                2.734224962,
                3.055790657,
            ],
        ),
        (
            Some((7, 10)),
            [
                1.118821064,
                1.255996824,
                1.412898962,
                1.591115024,
                1.792478585,
                2.019089728,
                2.273321617,
                2.557801126,
                2.875342155,
                3.228800260,
            ],
        ),
    ];
    let mut out = Vec::new();
    for (alpha, values) in &w1 {
        out.extend(column(Quantity::Approx, "w1", 10, *alpha, values));
    }
    for (alpha, values) in &w2 {
        out.extend(column(Quantity::Approx, "w2", 10, *alpha, values));
    }
    out
}

impl ExampleCase {
    /// Closed-form value of `var` at `v`, if one is registered.
    pub fn exact_value(&self, var: &str, v: f64) -> Option<f64> {
        let e = self.exact.get(var)?;
        e.eval_with_definitions(v, &self.spec.definitions, &|_| None).ok()
    }

    /// Default grid points, rounded to 12 decimals.
    pub fn grid_points(&self) -> Vec<f64> {
        let (a, b, h) = self.default_grid;
        grid_points(a, b, h)
    }

    pub fn references(&self, quantity: Quantity) -> impl Iterator<Item = &Reference> {
        self.reference.iter().filter(move |r| r.quantity == quantity)
    }
}

/// `start, start + step, ...` up to `stop` inclusive (with a small slack),
/// rounded to 12 decimals so that decimal grids print cleanly.
pub fn grid_points(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || stop < start {
        return Vec::new();
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCheck {
    /// Largest `|D^m w - rhs|` with derivatives by finite differences.
    pub equation_residual: f64,
    pub constraint_residual: f64,
    /// Equations skipped because their order is fractional.
    pub skipped: usize,
}

impl SelfCheck {
    pub fn max_residual(&self) -> f64 {
        self.equation_residual.max(self.constraint_residual)
    }
}

/// Richardson-extrapolated central difference for the first or second
/// derivative.
fn derivative(f: &dyn Fn(f64) -> f64, v: f64, order: u32) -> f64 {
    let d = |h: f64| match order {
        1 => (f(v + h) - f(v - h)) / (2.0 * h),
        _ => (f(v + h) - 2.0 * f(v) + f(v - h)) / (h * h),
    };
    // second differences lose more digits to rounding, so use a wider step
    let h = if order == 1 { 1e-4 } else { 1e-3 };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Substitutes the closed-form solution into every equation and constraint
/// on `v = 0, 0.1, ..., 0.9`.
pub fn self_check(case: &ExampleCase) -> Result<SelfCheck, TransformError> {
    let spec = &case.spec;
    let fractional = spec.effective_alpha().is_some();
    let value = |name: &str, v: f64| -> Option<f64> { case.exact_value(name, v) };
    let mut out = SelfCheck {
        equation_residual: 0.0,
        constraint_residual: 0.0,
        skipped: 0,
    };
    for i in 0..=9 {
        let v = 0.1 * i as f64;
        let lookup = |name: &str| value(name, v);
        for eq in &spec.equations {
            let m = match eq.order {
                DiffOrder::Integer(m) => m,
                DiffOrder::Alpha if !fractional => 1,
                DiffOrder::Alpha => {
                    out.skipped += 1;
                    continue;
                }
            };
            if m > 2 {
                out.skipped += 1;
                continue;
            }
            let exact = case
                .exact
                .get(&eq.var)
                .ok_or_else(|| TransformError::UnknownVariable(eq.var.clone()))?;
            let f = |x: f64| {
                exact
                    .eval_with_definitions(x, &spec.definitions, &|_| None)
                    .unwrap_or(f64::NAN)
            };
            let lhs = derivative(&f, v, m);
            let rhs = eq.rhs.eval_with_definitions(v, &spec.definitions, &lookup)?;
            out.equation_residual = out.equation_residual.max((lhs - rhs).abs());
        }
        if !fractional {
            for c in &spec.constraints {
                let r = c.eval_with_definitions(v, &spec.definitions, &lookup)?;
                out.constraint_residual = out.constraint_residual.max(r.abs());
            }
        }
    }
    for var in spec.variables.iter().filter(|v| v.kind == VarKind::Differential) {
        if !case.exact.contains_key(&var.id) {
            return Err(TransformError::UnknownVariable(var.id.clone()));
        }
    }
    if out.equation_residual.is_nan() || out.constraint_residual.is_nan() {
        out.equation_residual = f64::INFINITY;
    }
    Ok(out)
}
