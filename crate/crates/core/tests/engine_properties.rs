//! Structural properties of the order-by-order solver.

use dae_dtm::engine::{
    plan, solve, solve_fractional, verify_constraints, FracOrder, FractionalRule, PlanError, ProblemSpec, SchemaError,
    SolveError,
};
use dae_dtm::problems::{get_example, get_example_with, ExampleParams};
use serde_json::json;
use statrs::function::gamma::gamma;

fn example5(p: u32, q: u32) -> ProblemSpec {
    let params = ExampleParams {
        lambda: None,
        alpha: Some(FracOrder::new(p, q).unwrap()),
    };
    get_example_with(5, params).unwrap().spec
}

#[test]
fn raising_the_order_keeps_lower_coefficients() {
    for n in 1..=5 {
        let spec = get_example(n).unwrap().spec;
        let low = solve(&spec.clone().with_order(10)).unwrap();
        let high = solve(&spec.with_order(20)).unwrap();
        for ((id, a), (_, b)) in low.series.iter().zip(&high.series) {
            for k in 0..=10 * low.grid as usize {
                let (x, y) = (a.coeff(k), b.coeff(k));
                assert!(
                    (x - y).abs() <= 1e-13 * x.abs().max(1.0),
                    "example {n}, {id}[{k}]: {x} vs {y}"
                );
            }
        }
    }
}

#[test]
fn unit_order_matches_the_integer_solver() {
    let integer = get_example(5).unwrap().spec;
    let mut value = integer.to_value();
    value["alpha"] = json!("9/10");
    let fractional = ProblemSpec::from_value(value).unwrap();
    let via_alpha = solve_fractional(&fractional, FracOrder::one()).unwrap();
    let direct = solve(&integer).unwrap();
    assert_eq!(via_alpha.grid, 1);
    for ((_, a), (_, b)) in via_alpha.series.iter().zip(&direct.series) {
        assert_eq!(a.coeffs(), b.coeffs());
    }

    let mut value = integer.to_value();
    value.as_object_mut().unwrap().remove("alpha");
    value["equations"][0]["lhs"]["order"] = json!(1);
    value["variables"][0]["deriv_order"] = json!(1);
    let plain = solve(&ProblemSpec::from_value(value).unwrap()).unwrap();
    for ((_, a), (_, b)) in plain.series.iter().zip(&direct.series) {
        assert_eq!(a.coeffs(), b.coeffs());
    }
}

#[test]
fn fractional_solve_needs_a_fractional_problem() {
    let spec = get_example(2).unwrap().spec;
    let err = solve_fractional(&spec, FracOrder::new(1, 2).unwrap()).unwrap_err();
    assert!(matches!(err, SolveError::Plan(PlanError::Schema(_))));
}

#[test]
fn coupling_parameter_does_not_change_the_solution() {
    let solve_with = |lambda: f64| {
        let params = ExampleParams {
            lambda: Some(lambda),
            alpha: None,
        };
        solve(&get_example_with(3, params).unwrap().spec).unwrap()
    };
    let base = solve_with(15.0);
    for lambda in [5.0, 25.0] {
        let other = solve_with(lambda);
        for ((id, a), (_, b)) in base.series.iter().zip(&other.series) {
            for (k, (x, y)) in a.coeffs().iter().zip(b.coeffs()).enumerate() {
                assert!((x - y).abs() <= 1e-9, "lambda {lambda}, {id}[{k}]: {x} vs {y}");
            }
        }
    }
}

#[test]
fn transformed_constraints_vanish_below_the_shift() {
    for n in 1..=5 {
        let case = get_example(n).unwrap();
        let report = solve(&case.spec).unwrap();
        let ng = report.order * report.grid as usize;
        for b in &report.plan.bindings {
            for (j, c) in report.constraint_coefficients[b.constraint]
                .iter()
                .enumerate()
                .take(ng - b.shift + 1)
            {
                assert!(
                    c.abs() <= 1e-10,
                    "example {n}, constraint {} at {j}: {c:e}",
                    b.constraint
                );
            }
        }
    }
}

#[test]
fn shifts_follow_the_index() {
    let expect = [(1, "w", 2), (2, "w", 2), (3, "dw3", 2), (4, "w3", 2), (5, "w2", 0)];
    for (n, var, shift) in expect {
        let p = plan(&get_example(n).unwrap().spec).unwrap();
        assert_eq!(p.binding(var).unwrap().shift, shift, "example {n}");
    }
}

#[test]
fn polynomial_solutions_are_reproduced() {
    let r1 = solve(&get_example(1).unwrap().spec).unwrap();
    let w = r1.get("w").unwrap();
    for k in 0..=20 {
        let want = if k == 2 { 1.0 } else { 0.0 };
        assert!((w.coeff(k) - want).abs() <= 1e-12, "w[{k}] = {:e}", w.coeff(k));
    }
    let r4 = solve(&get_example(4).unwrap().spec).unwrap();
    let w3 = r4.get("w3").unwrap();
    for k in 0..=20 {
        let want = if k == 2 { -4.0 } else { 0.0 };
        assert!((w3.coeff(k) - want).abs() <= 1e-12, "w3[{k}] = {:e}", w3.coeff(k));
    }
}

#[test]
fn constraint_without_algebraic_unknown_fails_to_plan() {
    let spec = ProblemSpec::from_value(json!({
        "name": "unbound",
        "order": 5,
        "variables": [
            {"id": "x", "kind": "differential", "deriv_order": 1, "initial": [1.0]},
            {"id": "u", "kind": "algebraic"}
        ],
        "equations": [{"lhs": {"var": "x", "order": 1}, "rhs": "u*0 + x"}],
        "constraints": ["x - exp(v)"]
    }))
    .unwrap();
    assert!(matches!(plan(&spec), Err(PlanError::IndexTooHigh { .. })));
}

#[test]
fn non_square_system_is_a_schema_error() {
    let err = ProblemSpec::from_value(json!({
        "name": "non-square",
        "order": 5,
        "variables": [
            {"id": "x", "kind": "differential", "deriv_order": 1, "initial": [1.0]},
            {"id": "u", "kind": "algebraic"}
        ],
        "equations": [{"lhs": {"var": "x", "order": 1}, "rhs": "u"}],
        "constraints": []
    }))
    .unwrap_err();
    assert!(matches!(err, SchemaError::NonSquare { .. }));
}

#[test]
fn inconsistent_initial_data_is_rejected() {
    let mut value = get_example(2).unwrap().spec.to_value();
    value["variables"][0]["initial"] = json!([2.0, 0.0]);
    let spec = ProblemSpec::from_value(value).unwrap();
    assert!(matches!(
        solve(&spec),
        Err(SolveError::InconsistentInitialData { order: 0, .. })
    ));
}

#[test]
fn empty_grid_has_no_residual() {
    let spec = get_example(2).unwrap().spec;
    let report = solve(&spec).unwrap();
    assert_eq!(verify_constraints(&report, &spec, &[]).unwrap(), 0.0);
}

#[test]
fn circle_constraint_holds_on_the_grid() {
    let spec = get_example(2).unwrap().spec;
    let report = solve(&spec).unwrap();
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    assert!(verify_constraints(&report, &spec, &grid).unwrap() <= 1e-12);
}

#[test]
fn smaller_order_raises_the_solution() {
    let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    for rule in [FractionalRule::CaputoGrid, FractionalRule::IntegerIndex] {
        let reports: Vec<_> = [(1, 1), (9, 10), (4, 5), (7, 10)]
            .iter()
            .map(|&(p, q)| solve(&example5(p, q).with_fractional_rule(rule)).unwrap())
            .collect();
        for &v in &grid {
            let w1: Vec<f64> = reports.iter().map(|r| r.value("w1", v).unwrap().unwrap()).collect();
            assert!(w1.windows(2).all(|p| p[0] < p[1]), "{rule:?}, w1 at {v}: {w1:?}");
        }
    }
}

#[test]
fn fractional_grid_solution_satisfies_the_caputo_problem() {
    // D^a w1 = 2 exp(2v) + w2 - sqrt(w1) with w2 = sqrt(w1) reduces to
    // w1 = 1 + 2 I^a exp(2v) = 1 + 2 sum_k 2^k v^(k+a) / Gamma(k+a+1)
    let report = solve(&example5(9, 10).with_order(20)).unwrap();
    let a: f64 = 0.9;
    for v in [0.1f64, 0.3, 0.5] {
        let mut sum = 0.0;
        for k in 0..60 {
            sum += 2f64.powi(k) * v.powf(k as f64 + a) / gamma(k as f64 + a + 1.0);
        }
        let exact = 1.0 + 2.0 * sum;
        let got = report.value("w1", v).unwrap().unwrap();
        assert!((got - exact).abs() <= 1e-8, "v = {v}: {got} vs {exact}");
    }
}
