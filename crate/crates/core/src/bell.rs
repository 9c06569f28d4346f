//! Partial ordinary Bell polynomials and the Faà di Bruno composition rule.
//!
//! `B̂(k, l)` is the `t^k` coefficient of `(x1 t + x2 t^2 + ...)^l`. The table
//! is filled with the backward recurrence
//!
//! ```text
//! B̂(k, l) = Σ_{i=1}^{k-l+1} (i l / k) x_i B̂(k-i, l-1),   B̂(0,0) = 1,  B̂(k,0) = 0
//! ```
//!
//! which only reads rows `< k`, so a table can be extended one row at a time
//! as new inner coefficients become known.

use crate::series::{cauchy_coeff, SeriesError, TruncSeries};

/// Triangular table `values[k][l]`, `0 <= l <= k`, evaluated on `x1, x2, ...`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BellTable {
    // x[i - 1] holds x_i
    source: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

impl BellTable {
    /// Table holding only the seeded row `B̂(0,0) = 1`.
    pub fn new() -> Self {
        Self {
            source: Vec::new(),
            rows: vec![vec![1.0]],
        }
    }

    /// Builds rows `0..=x.len()` for the sequence `x = [x1, ..., xN]`.
    pub fn build(x: &[f64]) -> Self {
        let mut table = Self::new();
        for &xi in x {
            table.push(xi);
        }
        table
    }

    /// Appends `x_k` and fills row `k`. Rows `< k` are untouched.
    pub fn push(&mut self, x_k: f64) {
        self.source.push(x_k);
        let k = self.source.len();
        let mut row = vec![0.0; k + 1];
        for (l, slot) in row.iter_mut().enumerate().skip(1) {
            let mut acc = 0.0;
            for i in 1..=k - l + 1 {
                acc += (i * l) as f64 / k as f64 * self.source[i - 1] * self.rows[k - i][l - 1];
            }
            *slot = acc;
        }
        self.rows.push(row);
    }

    /// Drops rows `>= len` (keeps at least the seed row).
    pub fn truncate(&mut self, len: usize) {
        let len = len.max(1);
        self.rows.truncate(len);
        self.source.truncate(len - 1);
    }

    /// Highest complete row index.
    pub fn order(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rows.get(k).and_then(|row| row.get(l)).copied().unwrap_or(0.0)
    }
}

pub fn build_bell_table(x: &[f64]) -> BellTable {
    BellTable::build(x)
}

/// Reference value of `B̂(k, l)` as the `t^k` coefficient of the `l`-th power
/// of `Σ x_m t^m`, computed by repeated truncated Cauchy products.
///
/// Independent of [`BellTable`]; meant for cross-checking it.
pub fn bell_oracle(x: &[f64], k: usize, l: usize) -> f64 {
    let mut inner = vec![0.0; k + 1];
    for (m, slot) in inner.iter_mut().enumerate().skip(1) {
        *slot = x.get(m - 1).copied().unwrap_or(0.0);
    }
    let mut power = vec![0.0; k + 1];
    power[0] = 1.0;
    for _ in 0..l {
        power = (0..=k).map(|j| cauchy_coeff(&power, &inner, j)).collect();
    }
    power[k]
}

/// Order-`k` coefficient of `f∘g` given the outer coefficients `F` (taken at
/// `g(t0)`) and a Bell table built on `G(1..=k)`.
pub fn compose_coeff(outer: &[f64], table: &BellTable, k: usize) -> f64 {
    if k == 0 {
        return outer[0];
    }
    let row = table.row(k);
    (1..=k).map(|l| outer[l] * row[l]).sum()
}

/// Transform of `f∘g`: `H(0) = F(0)`, `H(k) = Σ_{l=1}^{k} F(l) B̂(k,l)(G(1), ...)`.
///
/// `outer` must be the transform of `f` about `inner.coeff(0)`; the result
/// lives on the inner series' origin and grid.
pub fn compose(outer: &TruncSeries, inner: &TruncSeries) -> Result<TruncSeries, SeriesError> {
    let order = inner.order();
    if outer.order() < order {
        return Err(SeriesError::TruncationUnderflow {
            order: outer.order(),
            n: order,
        });
    }
    let table = BellTable::build(&inner.coeffs()[1..]);
    let coeffs = (0..=order).map(|k| compose_coeff(outer.coeffs(), &table, k)).collect();
    TruncSeries::new(coeffs, inner.origin(), inner.grid_denominator())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn factorials(n: usize) -> Vec<f64> {
        let mut out = vec![1.0];
        for k in 1..=n {
            out.push(out[k - 1] * k as f64);
        }
        out
    }

    #[test]
    fn seed_rows() {
        let t = BellTable::build(&[0.7, -1.3, 2.0]);
        assert_eq!(t.get(0, 0), 1.0);
        for k in 1..=3 {
            assert_eq!(t.get(k, 0), 0.0);
        }
    }

    #[test]
    fn low_order_polynomials() {
        let (x1, x2, x3) = (1.5, -0.25, 3.0);
        let t = BellTable::build(&[x1, x2, x3]);
        assert_eq!(t.get(1, 1), x1);
        assert_eq!(t.get(2, 1), x2);
        assert_eq!(t.get(2, 2), x1 * x1);
        assert!((t.get(3, 2) - 2.0 * x1 * x2).abs() < 1e-15);
        assert!((bell_oracle(&[x1, x2, x3], 3, 2) - 2.0 * x1 * x2).abs() < 1e-15);
    }

    #[test]
    fn oracle_seeds() {
        let x = [0.3, 0.9, -0.1];
        assert_eq!(bell_oracle(&x, 0, 0), 1.0);
        assert_eq!(bell_oracle(&x, 3, 0), 0.0);
        for k in 1..=3 {
            assert_eq!(bell_oracle(&x, k, 1), x[k - 1]);
        }
    }

    #[test]
    fn diagonal_is_power_of_first() {
        for x1 in [-3.0, -1.0, 2.0, 5.0] {
            let t = BellTable::build(&[x1, 1.0, -2.0, 4.0, 7.0, -1.0]);
            for k in 0..=6 {
                assert_eq!(t.get(k, k), f64::powi(x1, k as i32));
            }
        }
    }

    #[test]
    fn table_matches_oracle_on_random_sequences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t = BellTable::build(&x);
            for k in 0..=10 {
                for l in 0..=k {
                    let o = bell_oracle(&x, k, l);
                    let tol = if o.abs() < 1.0 { 1e-12 } else { 1e-10 * o.abs() };
                    assert!((t.get(k, l) - o).abs() <= tol, "({k},{l})");
                }
            }
        }
    }

    #[test]
    fn incremental_push_and_truncate() {
        let x = [0.5, -1.0, 0.25, 2.0];
        let full = BellTable::build(&x);
        let mut t = BellTable::build(&x[..2]);
        t.push(x[2]);
        t.push(x[3]);
        assert_eq!(t, full);
        t.truncate(2);
        assert_eq!(t.order(), 1);
        assert_eq!(t.source(), &x[..1]);
        t.push(x[1]);
        assert_eq!(t.row(2), full.row(2));
    }

    #[test]
    fn exp_of_log_is_linear() {
        let n = 12;
        let f = factorials(n);
        let outer = TruncSeries::taylor(f.iter().map(|k| 1.0 / k).collect()).unwrap();
        let log: Vec<f64> = (0..=n)
            .map(|k| match k {
                0 => 0.0,
                _ if k % 2 == 1 => 1.0 / k as f64,
                _ => -1.0 / k as f64,
            })
            .collect();
        let h = compose(&outer, &TruncSeries::taylor(log).unwrap()).unwrap();
        assert!((h.coeff(0) - 1.0).abs() < 1e-15);
        assert!((h.coeff(1) - 1.0).abs() < 1e-15);
        for k in 2..=n {
            assert!(h.coeff(k).abs() < 1e-13, "H({k}) = {}", h.coeff(k));
        }
    }

    #[test]
    fn constant_term_passes_through() {
        let outer = TruncSeries::taylor(vec![3.5, 1.0, -2.0, 0.5]).unwrap();
        let inner = TruncSeries::taylor(vec![9.0, 0.3, 0.1, -0.7]).unwrap();
        assert_eq!(compose(&outer, &inner).unwrap().coeff(0), 3.5);
    }

    #[test]
    fn first_order_exp_of_negative_slope() {
        // H(1) = F(1) G(1) with F = exp transform at 0 and G(1) = -1.
        let outer = TruncSeries::dt_exp_forcing(1.0, 3);
        let inner = TruncSeries::taylor(vec![0.0, -1.0, -0.5, -1.0 / 3.0]).unwrap();
        assert_eq!(compose(&outer, &inner).unwrap().coeff(1), -1.0);
    }

    #[test]
    fn identity_inner_returns_outer() {
        let outer = TruncSeries::taylor(vec![0.2, -1.0, 4.0, 0.5, 3.0]).unwrap();
        let id = TruncSeries::taylor(vec![0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(compose(&outer, &id).unwrap(), outer);
    }

    #[test]
    fn short_outer_is_rejected() {
        let outer = TruncSeries::taylor(vec![1.0, 1.0]).unwrap();
        let inner = TruncSeries::taylor(vec![0.0, 1.0, 1.0]).unwrap();
        assert!(compose(&outer, &inner).is_err());
    }

    #[test]
    fn exp_of_random_cubic_matches_ode_recurrence() {
        // h = exp(g) solves h' = g' h, so k H(k) = Σ_{j=1}^{k} j G(j) H(k-j).
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let n = 10;
        let f = factorials(n);
        for _ in 0..5 {
            let mut g: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            g.resize(n + 1, 0.0);
            let e0 = g[0].exp();
            let outer: Vec<f64> = f.iter().map(|k| e0 / k).collect();
            let h = compose(
                &TruncSeries::taylor(outer).unwrap(),
                &TruncSeries::taylor(g.clone()).unwrap(),
            )
            .unwrap();
            let mut expected = vec![e0];
            for k in 1..=n {
                let s: f64 = (1..=k).map(|j| j as f64 * g[j] * expected[k - j]).sum();
                expected.push(s / k as f64);
            }
            for (k, e) in expected.iter().enumerate() {
                assert!((h.coeff(k) - e).abs() <= 1e-10 * e.abs().max(1.0));
            }
        }
    }
}
