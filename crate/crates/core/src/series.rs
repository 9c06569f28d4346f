//! Truncated power series and the elementary differential-transform rules.
//!
//! A [`TruncSeries`] holds the coefficients `W(0..=N)` of an expansion
//! `w(v) = Σ W(k) (v - v0)^(k/q)`. Classical expansions use `q = 1`; the
//! fractional solver works on the finer grid `q > 1`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("derivative of order {n} exceeds truncation order {order}")]
    TruncationUnderflow { order: usize, n: usize },
    #[error("series are incompatible (origin {lhs_origin} vs {rhs_origin}, grid {lhs_grid} vs {rhs_grid})")]
    Incompatible {
        lhs_origin: f64,
        rhs_origin: f64,
        lhs_grid: u32,
        rhs_grid: u32,
    },
    #[error("division by a series with zero constant term")]
    SingularDivision,
    #[error("cannot evaluate a grid-{grid} series at v = {v} below its origin {origin}")]
    Domain { v: f64, origin: f64, grid: u32 },
    #[error("series coefficients must be non-empty and finite")]
    InvalidCoefficients,
    #[error("grid denominator must be at least 1")]
    InvalidGrid,
    #[error("operation requires an integer grid, got denominator {0}")]
    FractionalGrid(u32),
}

/// Truncated expansion about `origin` on the grid `(v - origin)^(k/grid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncSeries {
    coeffs: Vec<f64>,
    origin: f64,
    grid: u32,
}

impl TruncSeries {
    pub fn new(coeffs: Vec<f64>, origin: f64, grid: u32) -> Result<Self, SeriesError> {
        if grid == 0 {
            return Err(SeriesError::InvalidGrid);
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) || !origin.is_finite() {
            return Err(SeriesError::InvalidCoefficients);
        }
        Ok(Self { coeffs, origin, grid })
    }

    /// Classical Taylor coefficients about zero.
    pub fn taylor(coeffs: Vec<f64>) -> Result<Self, SeriesError> {
        Self::new(coeffs, 0.0, 1)
    }

    pub fn zeros(order: usize, origin: f64, grid: u32) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
            origin,
            grid: grid.max(1),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn grid_denominator(&self) -> u32 {
        self.grid
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Keeps coefficients `0..=order`.
    pub fn truncated(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(order + 1);
        Self {
            coeffs,
            origin: self.origin,
            grid: self.grid,
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<(), SeriesError> {
        if self.origin != other.origin || self.grid != other.grid {
            return Err(SeriesError::Incompatible {
                lhs_origin: self.origin,
                rhs_origin: other.origin,
                lhs_grid: self.grid,
                rhs_grid: other.grid,
            });
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<f64>) -> Self {
        Self {
            coeffs,
            origin: self.origin,
            grid: self.grid,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Cauchy product, clamped to the shorter order.
    pub fn cauchy_product(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        let n = self.coeffs.len().min(other.coeffs.len());
        let coeffs = (0..n).map(|k| cauchy_coeff(&self.coeffs, &other.coeffs, k)).collect();
        Ok(self.with_coeffs(coeffs))
    }

    /// Series quotient `self / other`; requires `other[0] != 0`.
    pub fn divide(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        if other.coeffs[0] == 0.0 {
            return Err(SeriesError::SingularDivision);
        }
        let n = self.coeffs.len().min(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let q = quotient_coeff(self.coeffs[k], &other.coeffs, &out, k);
            out.push(q);
        }
        Ok(self.with_coeffs(out))
    }

    /// Transform of the `n`-th derivative: `(k+1)...(k+n) W(k+n)`.
    pub fn dt_derivative(&self, n: usize) -> Result<Self, SeriesError> {
        if self.grid != 1 {
            return Err(SeriesError::FractionalGrid(self.grid));
        }
        let order = self.order();
        if n > order {
            return Err(SeriesError::TruncationUnderflow { order, n });
        }
        let coeffs = (0..=order - n)
            .map(|k| rising_factor(k, n) * self.coeffs[k + n])
            .collect();
        Ok(self.with_coeffs(coeffs))
    }

    /// Transform of `v^n` about zero: `δ(k - n)`.
    pub fn dt_monomial(n: usize, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        if n <= order {
            coeffs[n] = 1.0;
        }
        Self {
            coeffs,
            origin: 0.0,
            grid: 1,
        }
    }

    /// Transform of `e^(alpha v)` about zero: `alpha^k / k!`.
    pub fn dt_exp_forcing(alpha: f64, order: usize) -> Self {
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut term = 1.0;
        for k in 0..=order {
            if k > 0 {
                term *= alpha / k as f64;
            }
            coeffs.push(term);
        }
        Self {
            coeffs,
            origin: 0.0,
            grid: 1,
        }
    }

    /// Inverse transform truncated at the stored order, by Horner's rule in
    /// `u = (v - origin)^(1/q)`.
    pub fn evaluate(&self, v: f64) -> Result<f64, SeriesError> {
        let dv = v - self.origin;
        let u = if self.grid == 1 {
            dv
        } else if dv < 0.0 {
            return Err(SeriesError::Domain {
                v,
                origin: self.origin,
                grid: self.grid,
            });
        } else {
            dv.powf(1.0 / self.grid as f64)
        };
        Ok(horner(&self.coeffs, u))
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

pub fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// `(k+1)(k+2)...(k+n)`.
pub fn rising_factor(k: usize, n: usize) -> f64 {
    (1..=n).map(|j| (k + j) as f64).product()
}

/// Coefficient `k` of the Cauchy product; missing entries read as zero.
pub fn cauchy_coeff(a: &[f64], b: &[f64], k: usize) -> f64 {
    let lo = k.saturating_sub(b.len().saturating_sub(1));
    let hi = k.min(a.len().saturating_sub(1));
    if a.is_empty() || b.is_empty() || lo > hi {
        return 0.0;
    }
    (lo..=hi).map(|i| a[i] * b[k - i]).sum()
}

/// Next quotient coefficient `R(k)` of `A / B` given `R(0..k)` and `A(k)`.
///
/// Caller guarantees `den[0] != 0`.
pub fn quotient_coeff(num_k: f64, den: &[f64], prev: &[f64], k: usize) -> f64 {
    let mut acc = num_k;
    for i in 1..=k.min(den.len() - 1) {
        acc -= den[i] * prev[k - i];
    }
    acc / den[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(c: &[f64]) -> TruncSeries {
        TruncSeries::taylor(c.to_vec()).unwrap()
    }

    #[test]
    fn derivative_of_log_series() {
        let d = s(&[0.0, 1.0, -0.5, 1.0 / 3.0]).dt_derivative(1).unwrap();
        assert_eq!(d.coeffs(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn second_derivative_of_exp_series() {
        let d = s(&[1.0, 1.0, 0.5, 1.0 / 6.0]).dt_derivative(2).unwrap();
        assert_eq!(d.coeffs(), &[1.0, 1.0]);
    }

    #[test]
    fn derivative_underflow() {
        let err = s(&[1.0, 2.0, 3.0]).dt_derivative(3).unwrap_err();
        assert_eq!(err, SeriesError::TruncationUnderflow { order: 2, n: 3 });
    }

    #[test]
    fn monomials() {
        assert_eq!(TruncSeries::dt_monomial(2, 4).coeffs(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(TruncSeries::dt_monomial(0, 2).coeffs(), &[1.0, 0.0, 0.0]);
        assert_eq!(TruncSeries::dt_monomial(5, 3).coeffs(), &[0.0; 4]);
    }

    #[test]
    fn exp_forcing() {
        let e = TruncSeries::dt_exp_forcing(2.0, 5);
        assert!((e.coeff(3) - 8.0 / 6.0).abs() < 1e-15);
        assert_eq!(TruncSeries::dt_exp_forcing(0.0, 3).coeffs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(TruncSeries::dt_exp_forcing(-1.0, 3).coeff(2), 0.5);
    }

    #[test]
    fn product_clamps_to_shorter_order() {
        let p = s(&[1.0, 1.0]).cauchy_product(&s(&[1.0, -1.0])).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 0.0]);
        let a = s(&[0.3, -1.2, 4.0]);
        assert_eq!(a.cauchy_product(&s(&[1.0, 0.0, 0.0])).unwrap(), a);
    }

    #[test]
    fn sin_squared_matches_double_angle_oracle() {
        // sin^2 v = (1 - cos 2v) / 2
        let n = 6;
        let sin: Vec<f64> = (0..=n)
            .map(|k| match k % 4 {
                1 => 1.0 / factorial(k),
                3 => -1.0 / factorial(k),
                _ => 0.0,
            })
            .collect();
        let oracle: Vec<f64> = (0..=n)
            .map(|k| {
                if k == 0 || k % 2 == 1 {
                    0.0
                } else {
                    let sign = if (k / 2) % 2 == 1 { 1.0 } else { -1.0 };
                    sign * 2f64.powi(k as i32) / factorial(k) / 2.0
                }
            })
            .collect();
        let sq = s(&sin).cauchy_product(&s(&sin)).unwrap();
        for (a, b) in sq.coeffs().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    #[test]
    fn linear_ops() {
        assert_eq!(s(&[1.0, 2.0]).add(&s(&[3.0, 4.0])).unwrap().coeffs(), &[4.0, 6.0]);
        assert_eq!(s(&[1.0, -1.0]).scale(2.0).coeffs(), &[2.0, -2.0]);
        let a = s(&[0.1, 0.7, -3.0]);
        assert_eq!(a.sub(&a).unwrap().coeffs(), &[0.0; 3]);
    }

    #[test]
    fn incompatible_series() {
        let a = s(&[1.0]);
        let b = TruncSeries::new(vec![1.0], 0.5, 1).unwrap();
        assert!(matches!(a.add(&b), Err(SeriesError::Incompatible { .. })));
        let c = TruncSeries::new(vec![1.0], 0.0, 2).unwrap();
        assert!(matches!(a.cauchy_product(&c), Err(SeriesError::Incompatible { .. })));
    }

    #[test]
    fn division() {
        let r = s(&[1.0, 0.0, 0.0]).divide(&s(&[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(r.coeffs(), &[1.0, -1.0, 1.0]);
        let a = s(&[2.0, -1.0, 0.25]);
        assert_eq!(a.divide(&a).unwrap().coeffs(), &[1.0, 0.0, 0.0]);
        assert_eq!(
            a.divide(&s(&[0.0, 1.0, 0.0])).unwrap_err(),
            SeriesError::SingularDivision
        );
    }

    #[test]
    fn forcing_phi1_by_rational_division() {
        // -(2v^4 + 2v^3 + 1) / (2 (1+v)^2); oracle: exact rational division.
        let num = s(&[-1.0, 0.0, 0.0, -2.0, -2.0]);
        let den = s(&[2.0, 4.0, 2.0, 0.0, 0.0]);
        let phi = num.divide(&den).unwrap();
        let expected = [-0.5, 1.0, -1.5, 1.0, -1.5];
        for (a, b) in phi.coeffs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn evaluate_log_and_exp() {
        let log: Vec<f64> = (0..=20)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / k as f64
                }
            })
            .collect();
        let v = s(&log).evaluate(0.1).unwrap();
        assert!((v - 0.0953101798).abs() < 1e-9);

        let exp = TruncSeries::dt_exp_forcing(1.0, 12);
        assert!((exp.evaluate(1.0).unwrap() - std::f64::consts::E).abs() < 3e-10);
        assert_eq!(exp.evaluate(0.0).unwrap(), 1.0);
    }

    #[test]
    fn fractional_grid_evaluation() {
        let g = TruncSeries::new(vec![1.0, 0.0, 3.0], 0.0, 2).unwrap();
        assert!((g.evaluate(4.0).unwrap() - 13.0).abs() < 1e-12);
        assert!(matches!(g.evaluate(-0.1), Err(SeriesError::Domain { .. })));
        assert!(g.dt_derivative(1).is_err());
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(TruncSeries::taylor(vec![]).is_err());
        assert!(TruncSeries::taylor(vec![f64::NAN]).is_err());
        assert!(TruncSeries::new(vec![1.0], 0.0, 0).is_err());
    }

    fn coeffs(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, len)
    }

    proptest! {
        #[test]
        fn evaluate_is_linear(a in coeffs(8), b in coeffs(8), v in -0.9f64..0.9) {
            let (a, b) = (s(&a), s(&b));
            let lhs = a.add(&b).unwrap().evaluate(v).unwrap();
            let rhs = a.evaluate(v).unwrap() + b.evaluate(v).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
        }

        #[test]
        fn divide_undoes_product(a in coeffs(10), mut b in coeffs(10), b0 in 0.5f64..2.0) {
            b[0] = b0;
            // forward error of the triangular solve grows like g^k
            let g = 1.0 + b[1..].iter().map(|x| x.abs()).sum::<f64>() / b0;
            let scale = 1.0 + a.iter().map(|x| x.abs()).fold(0.0, f64::max);
            let (a, b) = (s(&a), s(&b));
            let back = a.cauchy_product(&b).unwrap().divide(&b).unwrap();
            for (k, (x, y)) in back.coeffs().iter().zip(a.coeffs()).enumerate() {
                let tol = 1e-14 * scale * g.powi(k as i32 + 1);
                prop_assert!((x - y).abs() <= tol, "{} vs {} at {}", x, y, k);
            }
        }

        #[test]
        fn derivative_commutes_with_linear_combination(a in coeffs(7), b in coeffs(7), c in -3.0f64..3.0) {
            let (a, b) = (s(&a), s(&b));
            let lhs = a.add(&b.scale(c)).unwrap().dt_derivative(2).unwrap();
            let rhs = a.dt_derivative(2).unwrap().add(&b.dt_derivative(2).unwrap().scale(c)).unwrap();
            for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn exp_forcing_derivative_relation(alpha in -3.0f64..3.0) {
            let e = TruncSeries::dt_exp_forcing(alpha, 12);
            let d = e.dt_derivative(1).unwrap();
            let scaled = e.truncated(11).scale(alpha);
            for (x, y) in d.coeffs().iter().zip(scaled.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
            }
        }
    }
}
