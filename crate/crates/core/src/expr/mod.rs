//! Expression language for right-hand sides, constraints and forcing terms.
//!
//! Expressions are parsed from text, compiled onto a [`Tape`], and expanded
//! coefficient by coefficient. Nonlinear function applications go through the
//! Bell-polynomial composition rule; there is no symbolic differentiation.

mod outer;
mod parse;
mod tape;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use outer::OuterTransform;
pub use parse::{parse, parse_with, ParseContext, ParseError, ParseErrorKind};
pub use tape::{dependency_profile, expand, transform_expr, Env, NodeId, Tape, TapeBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FuncKind {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    /// Real power `x^r`.
    Powr(f64),
}

impl FuncKind {
    pub fn name(&self) -> &'static str {
        match self {
            FuncKind::Exp => "exp",
            FuncKind::Ln => "ln",
            FuncKind::Sin => "sin",
            FuncKind::Cos => "cos",
            FuncKind::Sqrt => "sqrt",
            FuncKind::Powr(_) => "powr",
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            FuncKind::Exp => x.exp(),
            FuncKind::Ln => x.ln(),
            FuncKind::Sin => x.sin(),
            FuncKind::Cos => x.cos(),
            FuncKind::Sqrt => x.sqrt(),
            FuncKind::Powr(r) => x.powf(r),
        }
    }
}

/// Expression tree over the independent variable and named quantities.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// The independent variable.
    Indep,
    /// A state variable or a named definition.
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Func(FuncKind, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("{func} needs a positive center, inner constant term is {center}")]
    CenterDomain { func: &'static str, center: f64 },
    #[error("division by a series with zero constant term")]
    SingularDivision,
    #[error("{func} expansion about {center} produced non-finite coefficients")]
    NonFinite { func: &'static str, center: f64 },
    #[error("unknown identifier `{0}`")]
    UnknownVariable(String),
    #[error("definition `{0}` refers to itself")]
    RecursiveDefinition(String),
    #[error("coefficient {index} of `{var}` is not available")]
    MissingCoefficient { var: String, index: usize },
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    /// Names referenced through [`Expr::Var`], in first-seen order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(name) = e {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        });
        out
    }

    pub fn depends_on_indep(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Indep));
        found
    }

    fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Indep | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Func(_, a) => a.walk(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.walk(f);
                b.walk(f);
            }
        }
    }

    /// Value when the tree contains no variables.
    pub fn const_value(&self) -> Option<f64> {
        if self.depends_on_indep() || !self.variables().is_empty() {
            return None;
        }
        self.eval(0.0, &|_| None).ok()
    }

    /// Pointwise value at `v`; `lookup` resolves [`Expr::Var`] names.
    pub fn eval(&self, v: f64, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, TransformError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Indep => v,
            Expr::Var(name) => lookup(name).ok_or_else(|| TransformError::UnknownVariable(name.clone()))?,
            Expr::Neg(a) => -a.eval(v, lookup)?,
            Expr::Add(a, b) => a.eval(v, lookup)? + b.eval(v, lookup)?,
            Expr::Sub(a, b) => a.eval(v, lookup)? - b.eval(v, lookup)?,
            Expr::Mul(a, b) => a.eval(v, lookup)? * b.eval(v, lookup)?,
            Expr::Div(a, b) => a.eval(v, lookup)? / b.eval(v, lookup)?,
            Expr::Pow(a, n) => a.eval(v, lookup)?.powi(*n as i32),
            Expr::Func(kind, a) => kind.apply(a.eval(v, lookup)?),
        })
    }

    /// Pointwise value with named definitions expanded in place.
    pub fn eval_with_definitions(
        &self,
        v: f64,
        definitions: &BTreeMap<String, Expr>,
        lookup: &dyn Fn(&str) -> Option<f64>,
    ) -> Result<f64, TransformError> {
        fn go(
            e: &Expr,
            v: f64,
            defs: &BTreeMap<String, Expr>,
            lookup: &dyn Fn(&str) -> Option<f64>,
            depth: usize,
        ) -> Result<f64, TransformError> {
            let resolve = |name: &str| -> Option<f64> {
                if let Some(x) = lookup(name) {
                    return Some(x);
                }
                let def = defs.get(name)?;
                if depth > defs.len() {
                    return None;
                }
                go(def, v, defs, lookup, depth + 1).ok()
            };
            e.eval(v, &resolve)
        }
        go(self, v, definitions, lookup, 0)
    }

    /// Text form using `indep` for the independent variable. Fully
    /// parenthesized, so it parses back to the same tree.
    pub fn display_with<'a>(&'a self, indep: &'a str) -> impl fmt::Display + 'a {
        Pretty { expr: self, indep }
    }
}

struct Pretty<'a> {
    expr: &'a Expr,
    indep: &'a str,
}

impl<'a> Pretty<'a> {
    fn child(&self, expr: &'a Expr) -> Pretty<'a> {
        Pretty {
            expr,
            indep: self.indep,
        }
    }
}

impl fmt::Display for Pretty<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| self.child(e);
        match self.expr {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Indep => write!(f, "{}", self.indep),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(a) => write!(f, "(-({}))", sub(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", sub(a), sub(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", sub(a), sub(b)),
            Expr::Pow(a, n) => write!(f, "({})^{n}", sub(a)),
            Expr::Func(FuncKind::Powr(r), a) => write!(f, "powr({}, {r})", sub(a)),
            Expr::Func(kind, a) => write!(f, "{}({})", kind.name(), sub(a)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display_with("v").fmt(f)
    }
}
