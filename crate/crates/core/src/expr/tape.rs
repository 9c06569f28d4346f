//! Compiled expressions with per-node coefficient caches.
//!
//! Each node stores the prefix of its transformed coefficients that has been
//! computed so far. Asking for order `k` extends every node on the path by the
//! missing orders only; function nodes extend their Bell table by one row per
//! order. Nodes that depend on state variables can be truncated back to a
//! shorter prefix when those variables change, while pure forcing terms keep
//! their cache for the whole solve.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{Expr, FuncKind, OuterTransform, TransformError};
use crate::bell::{compose_coeff, BellTable};
use crate::series::{cauchy_coeff, quotient_coeff, TruncSeries};

/// Variable name to known coefficients.
pub type Env = BTreeMap<String, TruncSeries>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Indep,
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Compose {
        kind: FuncKind,
        inner: usize,
        outer: Vec<f64>,
        bell: BellTable,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    state: bool,
    cache: Vec<f64>,
}

pub struct TapeBuilder {
    vars: Vec<String>,
    var_index: HashMap<String, usize>,
    definitions: BTreeMap<String, Expr>,
    resolved: HashMap<String, usize>,
    resolving: HashSet<String>,
    nodes: Vec<Node>,
    origin: f64,
    grid: u32,
}

impl TapeBuilder {
    /// `vars[i]` reads `env[i]` when the tape is evaluated.
    pub fn new(vars: &[String], origin: f64, grid: u32) -> Self {
        Self {
            vars: vars.to_vec(),
            var_index: vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect(),
            definitions: BTreeMap::new(),
            resolved: HashMap::new(),
            resolving: HashSet::new(),
            nodes: Vec::new(),
            origin,
            grid: grid.max(1),
        }
    }

    /// Named sub-expressions; each is compiled once and shared.
    pub fn with_definitions(mut self, definitions: BTreeMap<String, Expr>) -> Self {
        self.definitions = definitions;
        self
    }

    fn push(&mut self, op: Op, state: bool) -> usize {
        self.nodes.push(Node {
            op,
            state,
            cache: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn is_state(&self, i: usize) -> bool {
        self.nodes[i].state
    }

    fn binary(&mut self, a: &Expr, b: &Expr, make: fn(usize, usize) -> Op) -> Result<usize, TransformError> {
        let a = self.compile(a)?;
        let b = self.compile(b)?;
        let state = self.is_state(a) || self.is_state(b);
        Ok(self.push(make(a, b), state))
    }

    fn mul(&mut self, a: usize, b: usize) -> usize {
        let state = self.is_state(a) || self.is_state(b);
        self.push(Op::Mul(a, b), state)
    }

    fn compile(&mut self, e: &Expr) -> Result<usize, TransformError> {
        Ok(match e {
            Expr::Const(c) => self.push(Op::Const(*c), false),
            Expr::Indep => self.push(Op::Indep, false),
            Expr::Var(name) => {
                if let Some(&slot) = self.var_index.get(name) {
                    self.push(Op::Var(slot), true)
                } else if let Some(&id) = self.resolved.get(name) {
                    id
                } else if let Some(def) = self.definitions.get(name).cloned() {
                    if !self.resolving.insert(name.clone()) {
                        return Err(TransformError::RecursiveDefinition(name.clone()));
                    }
                    let id = self.compile(&def)?;
                    self.resolving.remove(name);
                    self.resolved.insert(name.clone(), id);
                    id
                } else {
                    return Err(TransformError::UnknownVariable(name.clone()));
                }
            }
            Expr::Neg(a) => {
                let a = self.compile(a)?;
                let state = self.is_state(a);
                self.push(Op::Neg(a), state)
            }
            Expr::Add(a, b) => self.binary(a, b, Op::Add)?,
            Expr::Sub(a, b) => self.binary(a, b, Op::Sub)?,
            Expr::Mul(a, b) => self.binary(a, b, Op::Mul)?,
            Expr::Div(a, b) => self.binary(a, b, Op::Div)?,
            Expr::Pow(a, n) => {
                if *n == 0 {
                    return Ok(self.push(Op::Const(1.0), false));
                }
                // square-and-multiply over Cauchy products
                let mut base = self.compile(a)?;
                let mut acc: Option<usize> = None;
                let mut n = *n;
                loop {
                    if n & 1 == 1 {
                        acc = Some(match acc {
                            None => base,
                            Some(x) => self.mul(x, base),
                        });
                    }
                    n >>= 1;
                    if n == 0 {
                        break;
                    }
                    base = self.mul(base, base);
                }
                acc.expect("n > 0")
            }
            Expr::Func(kind, a) => {
                let inner = self.compile(a)?;
                let state = self.is_state(inner);
                self.push(
                    Op::Compose {
                        kind: *kind,
                        inner,
                        outer: Vec::new(),
                        bell: BellTable::new(),
                    },
                    state,
                )
            }
        })
    }

    pub fn add(&mut self, e: &Expr) -> Result<NodeId, TransformError> {
        self.compile(e).map(NodeId)
    }

    pub fn finish(self) -> Tape {
        Tape {
            nodes: self.nodes,
            vars: self.vars,
            origin: self.origin,
            grid: self.grid,
        }
    }
}

/// A set of compiled expressions sharing one coefficient cache.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    vars: Vec<String>,
    origin: f64,
    grid: u32,
}

fn series_of<'a>(
    before: &'a [Node],
    vars: &[String],
    child: usize,
    env: &'a [Vec<f64>],
    k: usize,
) -> Result<&'a [f64], TransformError> {
    match before[child].op {
        Op::Var(slot) => {
            let s = &env[slot];
            if s.len() <= k {
                return Err(TransformError::MissingCoefficient {
                    var: vars[slot].clone(),
                    index: k,
                });
            }
            Ok(s)
        }
        _ => Ok(&before[child].cache),
    }
}

impl Tape {
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Whether the node's value changes with the state variables.
    pub fn depends_on_state(&self, id: NodeId) -> bool {
        self.nodes[id.0].state
    }

    /// Order-`k` transformed coefficient of node `id`. `env[i]` holds the
    /// coefficients of `vars()[i]` and must cover indices `0..=k`.
    pub fn coeff(&mut self, id: NodeId, k: usize, env: &[Vec<f64>]) -> Result<f64, TransformError> {
        if let Op::Var(slot) = self.nodes[id.0].op {
            return env[slot]
                .get(k)
                .copied()
                .ok_or_else(|| TransformError::MissingCoefficient {
                    var: self.vars[slot].clone(),
                    index: k,
                });
        }
        self.extend(id.0, k, env)?;
        Ok(self.nodes[id.0].cache[k])
    }

    /// Coefficients `0..=order` of node `id`.
    pub fn series(&mut self, id: NodeId, order: usize, env: &[Vec<f64>]) -> Result<Vec<f64>, TransformError> {
        (0..=order).map(|k| self.coeff(id, k, env)).collect()
    }

    /// Forgets cached orders `>= len` of every state-dependent node.
    pub fn truncate_state(&mut self, len: usize) {
        for node in self.nodes.iter_mut().filter(|n| n.state) {
            node.cache.truncate(len);
            if let Op::Compose { outer, bell, .. } = &mut node.op {
                bell.truncate(len);
                if len == 0 {
                    outer.clear();
                }
            }
        }
    }

    fn children(&self, idx: usize) -> [Option<usize>; 2] {
        match self.nodes[idx].op {
            Op::Const(_) | Op::Indep | Op::Var(_) => [None, None],
            Op::Neg(a) | Op::Compose { inner: a, .. } => [Some(a), None],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => [Some(a), Some(b)],
        }
    }

    fn extend(&mut self, idx: usize, k: usize, env: &[Vec<f64>]) -> Result<(), TransformError> {
        if matches!(self.nodes[idx].op, Op::Var(_)) || self.nodes[idx].cache.len() > k {
            return Ok(());
        }
        for child in self.children(idx).into_iter().flatten() {
            self.extend(child, k, env)?;
        }
        let (origin, grid) = (self.origin, self.grid as usize);
        let (before, rest) = self.nodes.split_at_mut(idx);
        let node = &mut rest[0];
        let vars = &self.vars;
        for j in node.cache.len()..=k {
            let value = match &mut node.op {
                Op::Const(c) => {
                    if j == 0 {
                        *c
                    } else {
                        0.0
                    }
                }
                Op::Indep => {
                    if j == 0 {
                        origin
                    } else if j == grid {
                        1.0
                    } else {
                        0.0
                    }
                }
                Op::Var(_) => unreachable!("variables are read from the environment"),
                Op::Neg(a) => -series_of(before, vars, *a, env, j)?[j],
                Op::Add(a, b) => series_of(before, vars, *a, env, j)?[j] + series_of(before, vars, *b, env, j)?[j],
                Op::Sub(a, b) => series_of(before, vars, *a, env, j)?[j] - series_of(before, vars, *b, env, j)?[j],
                Op::Mul(a, b) => {
                    let sa = series_of(before, vars, *a, env, j)?;
                    let sb = series_of(before, vars, *b, env, j)?;
                    cauchy_coeff(&sa[..=j], &sb[..=j], j)
                }
                Op::Div(a, b) => {
                    let num = series_of(before, vars, *a, env, j)?[j];
                    let den = series_of(before, vars, *b, env, j)?;
                    if den[0] == 0.0 {
                        return Err(TransformError::SingularDivision);
                    }
                    quotient_coeff(num, &den[..=j], &node.cache, j)
                }
                Op::Compose {
                    kind,
                    inner,
                    outer,
                    bell,
                } => {
                    let g = series_of(before, vars, *inner, env, j)?;
                    if j == 0 {
                        *bell = BellTable::new();
                        *outer = OuterTransform::new(*kind, g[0])?.coefficients(32)?;
                    } else {
                        if j >= outer.len() {
                            *outer = OuterTransform::new(*kind, g[0])?.coefficients(2 * j)?;
                        }
                        debug_assert_eq!(bell.order(), j - 1);
                        bell.push(g[j]);
                    }
                    compose_coeff(outer, bell, j)
                }
            };
            node.cache.push(value);
        }
        Ok(())
    }
}

fn env_layout(env: &Env) -> (Vec<String>, Vec<Vec<f64>>, f64, u32) {
    let names: Vec<String> = env.keys().cloned().collect();
    let coeffs = env.values().map(|s| s.coeffs().to_vec()).collect();
    let (origin, grid) = env
        .values()
        .next()
        .map_or((0.0, 1), |s| (s.origin(), s.grid_denominator()));
    (names, coeffs, origin, grid)
}

/// Order-`k` transformed coefficient of `expr` with state taken from `env`.
/// Expressions without state use origin 0 on the integer grid.
pub fn transform_expr(expr: &Expr, env: &Env, k: usize) -> Result<f64, TransformError> {
    let (names, coeffs, origin, grid) = env_layout(env);
    let mut builder = TapeBuilder::new(&names, origin, grid);
    let root = builder.add(expr)?;
    builder.finish().coeff(root, k, &coeffs)
}

/// Coefficients `0..=order` of `expr` about `origin` on the given grid.
pub fn expand(expr: &Expr, env: &Env, order: usize, origin: f64, grid: u32) -> Result<TruncSeries, TransformError> {
    let (names, coeffs, _, _) = env_layout(env);
    let mut builder = TapeBuilder::new(&names, origin, grid);
    let root = builder.add(expr)?;
    let out = builder.finish().series(root, order, &coeffs)?;
    TruncSeries::new(out, origin, grid).map_err(|_| TransformError::NonFinite {
        func: "expansion",
        center: origin,
    })
}

/// Upper bound on the coefficient index of each referenced name that the
/// order-`k` transform reads. Products and compositions read `0..=k`.
pub fn dependency_profile(expr: &Expr, k: usize) -> BTreeMap<String, usize> {
    expr.variables().into_iter().map(|v| (v, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn taylor(c: Vec<f64>) -> TruncSeries {
        TruncSeries::taylor(c).unwrap()
    }

    fn log1p(n: usize, sign: f64) -> Vec<f64> {
        (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                    s * sign.powi(k as i32) / k as f64
                }
            })
            .collect()
    }

    #[test]
    fn exp_of_log_one_minus_v_first_order() {
        let mut env = Env::new();
        env.insert("w2".into(), taylor(log1p(6, -1.0)));
        let e = parse("exp(w2)").unwrap();
        assert_eq!(transform_expr(&e, &env, 1).unwrap(), -1.0);
        assert_eq!(transform_expr(&e, &env, 0).unwrap(), 1.0);
    }

    #[test]
    fn circle_constraint_vanishes() {
        let n = 10;
        let mut fact = vec![1.0];
        for k in 1..=n {
            fact.push(fact[k - 1] * k as f64);
        }
        let cos: Vec<f64> = (0..=n)
            .map(|k| match k % 4 {
                0 => 1.0 / fact[k],
                2 => -1.0 / fact[k],
                _ => 0.0,
            })
            .collect();
        let sin: Vec<f64> = (0..=n)
            .map(|k| match k % 4 {
                1 => 1.0 / fact[k],
                3 => -1.0 / fact[k],
                _ => 0.0,
            })
            .collect();
        let mut env = Env::new();
        env.insert("w1".into(), taylor(cos));
        env.insert("w2".into(), taylor(sin));
        let e = parse("w1^2 + w2^2 - 1").unwrap();
        for k in 0..=n {
            assert!(transform_expr(&e, &env, k).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_at_unit_center() {
        let mut env = Env::new();
        env.insert("w1".into(), taylor(vec![1.0, 2.0, 2.0]));
        assert_eq!(transform_expr(&parse("sqrt(w1)").unwrap(), &env, 0).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        let mut env = Env::new();
        env.insert("w".into(), taylor(vec![0.0, 1.0]));
        assert!(matches!(
            transform_expr(&parse("ln(w)").unwrap(), &env, 1),
            Err(TransformError::CenterDomain { func: "ln", .. })
        ));
        assert!(matches!(
            transform_expr(&parse("1 / w").unwrap(), &env, 0),
            Err(TransformError::SingularDivision)
        ));
        assert!(matches!(
            transform_expr(&parse("w + u").unwrap(), &env, 0),
            Err(TransformError::UnknownVariable(_))
        ));
        assert!(matches!(
            transform_expr(&parse("w").unwrap(), &env, 4),
            Err(TransformError::MissingCoefficient { .. })
        ));
    }

    #[test]
    fn forcing_terms_expand_by_division_and_composition() {
        let phi1 = parse("-(2*v^4+2*v^3+1)/(2*(1+v)^2)").unwrap();
        let s = expand(&phi1, &Env::new(), 4, 0.0, 1).unwrap();
        for (a, b) in s.coeffs().iter().zip([-0.5, 1.0, -1.5, 1.0, -1.5]) {
            assert!((a - b).abs() < 1e-14);
        }
        // ln(1 - v^2) = -v^2 - v^4/2 - ...
        let phi3 = expand(&parse("ln(1-v^2)").unwrap(), &Env::new(), 6, 0.0, 1).unwrap();
        for (a, b) in phi3.coeffs().iter().zip([0.0, 0.0, -1.0, 0.0, -0.5, 0.0, -1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn indep_on_shifted_origin_and_grid() {
        let s = expand(&parse("v").unwrap(), &Env::new(), 3, 0.5, 1).unwrap();
        assert_eq!(s.coeffs(), &[0.5, 1.0, 0.0, 0.0]);
        let g = expand(&parse("exp(2*v)").unwrap(), &Env::new(), 6, 0.0, 3).unwrap();
        assert_eq!(g.coeffs(), &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn integer_power_is_repeated_product() {
        let mut env = Env::new();
        env.insert("w".into(), taylor(vec![-1.0, 2.0, 0.5, 0.0, 0.0, 0.0]));
        let p = expand(&parse("w^5").unwrap(), &env, 5, 0.0, 1).unwrap();
        let mut direct = taylor(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for _ in 0..5 {
            direct = direct.cauchy_product(&env["w"]).unwrap();
        }
        for (a, b) in p.coeffs().iter().zip(direct.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
        // negative center is fine for integer powers
        assert_eq!(transform_expr(&parse("w^0").unwrap(), &env, 0).unwrap(), 1.0);
    }

    #[test]
    fn definitions_are_shared_and_checked() {
        let mut defs = BTreeMap::new();
        defs.insert("phi".to_string(), parse("exp(v)").unwrap());
        defs.insert("loop1".to_string(), parse("loop2 + 1").unwrap());
        defs.insert("loop2".to_string(), parse("loop1").unwrap());
        let mut b = TapeBuilder::new(&[], 0.0, 1).with_definitions(defs);
        let a = b.add(&parse("phi").unwrap()).unwrap();
        let c = b.add(&parse("phi").unwrap()).unwrap();
        assert_eq!(a, c);
        assert!(matches!(
            b.add(&parse("loop1").unwrap()),
            Err(TransformError::RecursiveDefinition(_))
        ));
    }

    #[test]
    fn truncation_recomputes_state_nodes() {
        let vars = vec!["w".to_string()];
        let mut b = TapeBuilder::new(&vars, 0.0, 1);
        let root = b.add(&parse("exp(w) * exp(v)").unwrap()).unwrap();
        let mut tape = b.finish();
        let env = vec![vec![0.0, 1.0, 0.0, 0.0]];
        let first = tape.series(root, 3, &env).unwrap();
        // exp(w) exp(v) = exp(2v)
        for (k, c) in first.iter().enumerate() {
            let expected = 2f64.powi(k as i32) / [1.0, 1.0, 2.0, 6.0][k];
            assert!((c - expected).abs() < 1e-15);
        }
        tape.truncate_state(0);
        let env = vec![vec![1.0, 0.0, 0.0, 0.0]];
        let second = tape.series(root, 3, &env).unwrap();
        let e = std::f64::consts::E;
        for (k, c) in second.iter().enumerate() {
            assert!((c - e / [1.0, 1.0, 2.0, 6.0][k]).abs() < 1e-15);
        }
    }

    #[test]
    fn dependency_profiles() {
        let p = dependency_profile(&parse("2*w3").unwrap(), 5);
        assert_eq!(p, BTreeMap::from([("w3".to_string(), 5)]));
        let p = dependency_profile(&parse("exp(w2)").unwrap(), 3);
        assert_eq!(p, BTreeMap::from([("w2".to_string(), 3)]));
        let p = dependency_profile(&parse("w1*w").unwrap(), 2);
        assert_eq!(p, BTreeMap::from([("w1".to_string(), 2), ("w".to_string(), 2)]));
    }
}
