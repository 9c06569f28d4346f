//! Cauchy contour-integral oracle for Taylor coefficients and a generator of
//! random forcing expressions whose complex extensions are analytic on the
//! contour.

use std::f64::consts::PI;

use dae_dtm::expr::{expand, parse, Env, Expr, FuncKind};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::Rng;

pub const RADIUS: f64 = 0.25;
pub const NODES: usize = 256;
pub const ORDER: usize = 8;
pub const REL_TOL: f64 = 1e-7;

/// Complex evaluation; `None` when a branch cut or pole comes too close.
pub fn eval(e: &Expr, z: Complex64) -> Option<Complex64> {
    Some(match e {
        Expr::Const(c) => Complex64::new(*c, 0.0),
        Expr::Indep => z,
        Expr::Var(_) => return None,
        Expr::Neg(a) => -eval(a, z)?,
        Expr::Add(a, b) => eval(a, z)? + eval(b, z)?,
        Expr::Sub(a, b) => eval(a, z)? - eval(b, z)?,
        Expr::Mul(a, b) => eval(a, z)? * eval(b, z)?,
        Expr::Div(a, b) => {
            let d = eval(b, z)?;
            if d.norm() < 0.2 {
                return None;
            }
            eval(a, z)? / d
        }
        Expr::Pow(a, n) => eval(a, z)?.powu(*n),
        Expr::Func(kind, a) => {
            let x = eval(a, z)?;
            let branch = |x: Complex64| (x.re > 0.2).then_some(x);
            match kind {
                FuncKind::Exp => x.exp(),
                FuncKind::Sin => x.sin(),
                FuncKind::Cos => x.cos(),
                FuncKind::Ln => branch(x)?.ln(),
                FuncKind::Sqrt => branch(x)?.sqrt(),
                FuncKind::Powr(r) => branch(x)?.powf(*r),
            }
        }
    })
}

/// Scaled coefficients `a_k r^k` on `|z| = r` by the trapezoidal rule, and
/// the largest `|f|` on the contour, which bounds every scaled coefficient.
pub struct Contour {
    pub scaled: Vec<f64>,
    pub sup: f64,
}

pub fn contour_coefficients(e: &Expr) -> Option<Contour> {
    let values: Vec<Complex64> = (0..NODES)
        .map(|j| eval(e, Complex64::from_polar(RADIUS, 2.0 * PI * j as f64 / NODES as f64)))
        .collect::<Option<_>>()?;
    let sup = values.iter().fold(0.0f64, |m, f| m.max(f.norm()));
    let scaled = (0..=ORDER)
        .map(|k| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(j, f)| f * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / NODES as f64))
                .sum();
            sum.re / NODES as f64
        })
        .collect();
    Some(Contour { scaled, sup })
}

fn coef(rng: &mut StdRng) -> String {
    format!("{:.3}", rng.gen_range(-2.0..2.0))
}

fn positive(rng: &mut StdRng, depth: u32) -> String {
    format!("({:.3} + 0.3*({}))", rng.gen_range(1.5..3.0), random_expr(rng, depth))
}

pub fn random_expr(rng: &mut StdRng, depth: u32) -> String {
    if depth == 0 {
        return match rng.gen_range(0..3) {
            0 => "v".to_string(),
            1 => coef(rng),
            _ => format!("{}*v", coef(rng)),
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..11) {
        0 => format!("{} + {}", random_expr(rng, d), random_expr(rng, d)),
        1 => format!("({}) - ({})", random_expr(rng, d), random_expr(rng, d)),
        2 => format!("({})*({})", random_expr(rng, d), random_expr(rng, d)),
        3 => format!("({})/{}", random_expr(rng, d), positive(rng, d)),
        4 => format!("({})^{}", random_expr(rng, d), rng.gen_range(2..4)),
        5 => format!("exp({})", random_expr(rng, d)),
        6 => format!("sin({})", random_expr(rng, d)),
        7 => format!("cos({})", random_expr(rng, d)),
        8 => format!("ln{}", positive(rng, d)),
        9 => format!("sqrt{}", positive(rng, d)),
        _ => format!("powr({}, {:.2})", positive(rng, d), rng.gen_range(-1.5..1.5)),
    }
}

/// Largest difference between expanded and contour coefficients, both
/// scaled by `r^k`, relative to the size of the function on the contour.
pub fn compare(text: &str, contour: &Contour) -> f64 {
    let e = parse(text).unwrap();
    let series = expand(&e, &Env::new(), ORDER, 0.0, 1).unwrap();
    let scaled: Vec<f64> = (0..=ORDER).map(|k| series.coeff(k) * RADIUS.powi(k as i32)).collect();
    let norm = contour.sup.max(f64::MIN_POSITIVE);
    scaled
        .iter()
        .zip(&contour.scaled)
        .map(|(a, b)| (a - b).abs() / norm)
        .fold(0.0, f64::max)
}
