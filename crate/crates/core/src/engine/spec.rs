//! Problem descriptions and their JSON form.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SchemaError;
use crate::expr::{parse_with, Expr, ParseContext};

const RESERVED: [&str; 6] = ["exp", "ln", "sin", "cos", "sqrt", "powr"];

/// Largest grid denominator accepted for a fractional order.
pub const MAX_GRID: u32 = 10;

/// Rational derivative order `p/q` in lowest terms, `0 < p/q <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FracOrder {
    p: u32,
    q: u32,
}

impl FracOrder {
    pub fn new(p: u32, q: u32) -> Result<Self, SchemaError> {
        if q == 0 || p == 0 || p > q {
            return Err(SchemaError::UnsupportedOrder(format!("{p}/{q}")));
        }
        let g = p.gcd(&q);
        let (p, q) = (p / g, q / g);
        if q > MAX_GRID {
            return Err(SchemaError::UnsupportedOrder(format!(
                "{p}/{q} needs a grid finer than 1/{MAX_GRID}"
            )));
        }
        Ok(Self { p, q })
    }

    pub fn one() -> Self {
        Self { p: 1, q: 1 }
    }

    /// Accepts `"p/q"`, a decimal such as `"0.9"`, or a JSON number.
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let text = text.trim();
        if let Some((p, q)) = text.split_once('/') {
            let bad = || SchemaError::UnsupportedOrder(text.to_string());
            let p: u32 = p.trim().parse().map_err(|_| bad())?;
            let q: u32 = q.trim().parse().map_err(|_| bad())?;
            return Self::new(p, q);
        }
        let x: f64 = text
            .parse()
            .map_err(|_| SchemaError::UnsupportedOrder(text.to_string()))?;
        Self::from_f64(x)
    }

    /// Recovers `p/q` with `q <= 10` from a decimal value.
    pub fn from_f64(x: f64) -> Result<Self, SchemaError> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(SchemaError::UnsupportedOrder(x.to_string()));
        }
        for q in 1..=MAX_GRID {
            let p = (x * q as f64).round();
            if (x * q as f64 - p).abs() < 1e-9 {
                return Self::new(p as u32, q);
            }
        }
        Err(SchemaError::UnsupportedOrder(x.to_string()))
    }

    pub fn numer(&self) -> u32 {
        self.p
    }

    pub fn denom(&self) -> u32 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn is_one(&self) -> bool {
        self.p == self.q
    }
}

impl fmt::Display for FracOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Differential,
    Algebraic,
}

/// How a fractional derivative acts on transformed coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FractionalRule {
    /// Caputo derivative on the grid `(v - v0)^(k/q)` for `alpha = p/q`:
    /// index `k + p` maps to `k` with factor `Γ(1 + (k+p)/q) / Γ(1 + k/q)`.
    #[default]
    CaputoGrid,
    /// Integer-index recurrence `W(k+1) = Γ(αk + 1) / Γ(αk + α + 1) RHS(k)`
    /// on ordinary powers of `v - v0`. Not a Caputo solution for `α < 1`;
    /// kept because it reproduces the fractional reference values.
    IntegerIndex,
}

/// Order of the derivative on an equation's left-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOrder {
    Integer(u32),
    /// The problem-wide fractional order `alpha`.
    Alpha,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: String,
    pub kind: VarKind,
    /// Differential: `w(v0), w'(v0), ...`. Algebraic: optional guess for the
    /// constant coefficient.
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub var: String,
    pub order: DiffOrder,
    pub rhs: Expr,
}

/// A validated semi-explicit DAE: `D^m w = rhs` for each differential
/// variable and `0 = g` for each constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub indep_var: String,
    pub expansion_point: f64,
    /// Truncation order `N`, a degree in the independent variable.
    pub order: usize,
    pub alpha: Option<FracOrder>,
    pub fractional_rule: FractionalRule,
    pub variables: Vec<Variable>,
    pub equations: Vec<Equation>,
    pub constraints: Vec<Expr>,
    /// Named sub-expressions usable in any expression.
    pub definitions: BTreeMap<String, Expr>,
    /// Closed-form solutions, where known.
    pub exact: BTreeMap<String, Expr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawOrder {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    id: String,
    kind: VarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deriv_order: Option<RawOrder>,
    #[serde(default)]
    initial: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLhs {
    var: String,
    order: RawOrder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEquation {
    lhs: RawLhs,
    rhs: String,
}

fn default_indep() -> String {
    "v".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    #[serde(default = "default_indep")]
    indep_var: String,
    #[serde(default)]
    expansion_point: f64,
    order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<RawOrder>,
    #[serde(default, skip_serializing_if = "is_default_rule")]
    fractional_rule: FractionalRule,
    variables: Vec<RawVariable>,
    equations: Vec<RawEquation>,
    #[serde(default)]
    constraints: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    definitions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    exact: BTreeMap<String, String>,
}

fn is_default_rule(rule: &FractionalRule) -> bool {
    *rule == FractionalRule::default()
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&s)
}

enum LhsOrder {
    Integer(u32),
    Alpha,
    Fraction(FracOrder),
}

fn lhs_order(raw: &RawOrder) -> Result<LhsOrder, SchemaError> {
    let from_frac = |f: FracOrder| {
        if f.is_one() {
            LhsOrder::Integer(1)
        } else {
            LhsOrder::Fraction(f)
        }
    };
    match raw {
        RawOrder::Number(x) if *x >= 1.0 && x.fract() == 0.0 && *x <= 64.0 => Ok(LhsOrder::Integer(*x as u32)),
        RawOrder::Number(x) => FracOrder::from_f64(*x).map(from_frac),
        RawOrder::Text(t) if t.trim() == "alpha" => Ok(LhsOrder::Alpha),
        RawOrder::Text(t) => match t.trim().parse::<u32>() {
            Ok(m) if m >= 1 => Ok(LhsOrder::Integer(m)),
            _ => FracOrder::parse(t).map(from_frac),
        },
    }
}

fn raw_alpha(raw: &RawOrder) -> Result<FracOrder, SchemaError> {
    match raw {
        RawOrder::Number(x) => FracOrder::from_f64(*x),
        RawOrder::Text(t) => FracOrder::parse(t),
    }
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let raw: RawSpec = serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_value(value: Value) -> Result<Self, SchemaError> {
        let raw: RawSpec = serde_json::from_value(value).map_err(|e| SchemaError::Json(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawSpec) -> Result<Self, SchemaError> {
        if raw.order == 0 {
            return Err(SchemaError::InvalidTruncation);
        }
        if !raw.expansion_point.is_finite() {
            return Err(SchemaError::Invalid("expansion_point must be finite".into()));
        }
        if !valid_identifier(&raw.indep_var) {
            return Err(SchemaError::InvalidIdentifier(raw.indep_var));
        }
        let mut alpha = raw.alpha.as_ref().map(raw_alpha).transpose()?;

        let mut names = HashSet::new();
        for id in raw.variables.iter().map(|v| &v.id).chain(raw.definitions.keys()) {
            if !valid_identifier(id) || *id == raw.indep_var {
                return Err(SchemaError::InvalidIdentifier(id.clone()));
            }
            if !names.insert(id.clone()) {
                return Err(SchemaError::DuplicateName(id.clone()));
            }
        }
        let ctx = ParseContext::new(&raw.indep_var).with_known(names.iter().cloned());
        let parse =
            |what: String, text: &str| parse_with(text, &ctx).map_err(|source| SchemaError::Parse { what, source });

        let mut definitions = BTreeMap::new();
        for (name, text) in &raw.definitions {
            definitions.insert(name.clone(), parse(format!("definition `{name}`"), text)?);
        }

        let mut equations = Vec::new();
        for eq in &raw.equations {
            let var = raw
                .variables
                .iter()
                .find(|v| v.id == eq.lhs.var)
                .ok_or_else(|| SchemaError::UnknownVariable(eq.lhs.var.clone()))?;
            if var.kind == VarKind::Algebraic {
                return Err(SchemaError::EquationForAlgebraic(var.id.clone()));
            }
            if equations.iter().any(|e: &Equation| e.var == var.id) {
                return Err(SchemaError::DuplicateEquation(var.id.clone()));
            }
            let order = match lhs_order(&eq.lhs.order)? {
                LhsOrder::Integer(m) => DiffOrder::Integer(m),
                LhsOrder::Alpha => DiffOrder::Alpha,
                LhsOrder::Fraction(f) => {
                    match alpha {
                        Some(a) if a != f => return Err(SchemaError::MixedAlpha),
                        _ => alpha = Some(f),
                    }
                    DiffOrder::Alpha
                }
            };
            if let Some(declared) = &var.deriv_order {
                let consistent = match (lhs_order(declared)?, order) {
                    (LhsOrder::Integer(a), DiffOrder::Integer(b)) => a == b,
                    (LhsOrder::Alpha, DiffOrder::Alpha) => true,
                    (LhsOrder::Fraction(f), DiffOrder::Alpha) => alpha == Some(f),
                    _ => false,
                };
                if !consistent {
                    return Err(SchemaError::Invalid(format!(
                        "deriv_order of `{}` disagrees with its equation",
                        var.id
                    )));
                }
            }
            equations.push(Equation {
                var: var.id.clone(),
                order,
                rhs: parse(format!("equation for `{}`", var.id), &eq.rhs)?,
            });
        }
        if equations.iter().any(|e| e.order == DiffOrder::Alpha) && alpha.is_none() {
            return Err(SchemaError::Invalid("equation uses `alpha` but none is given".into()));
        }

        let mut variables = Vec::new();
        for v in &raw.variables {
            let expected = match v.kind {
                VarKind::Algebraic => None,
                VarKind::Differential => {
                    let eq = equations
                        .iter()
                        .find(|e| e.var == v.id)
                        .ok_or_else(|| SchemaError::MissingEquation(v.id.clone()))?;
                    Some(match eq.order {
                        DiffOrder::Integer(m) => m as usize,
                        DiffOrder::Alpha => 1,
                    })
                }
            };
            let ok = match expected {
                Some(n) => v.initial.len() == n,
                None => v.initial.len() <= 1,
            };
            if !ok || v.initial.iter().any(|x| !x.is_finite()) {
                return Err(SchemaError::InitialData {
                    var: v.id.clone(),
                    expected: expected.unwrap_or(1),
                    found: v.initial.len(),
                });
            }
            variables.push(Variable {
                id: v.id.clone(),
                kind: v.kind,
                initial: v.initial.clone(),
            });
        }

        let constraints = raw
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| parse(format!("constraint {}", i + 1), c))
            .collect::<Result<Vec<_>, _>>()?;
        let algebraic = variables.iter().filter(|v| v.kind == VarKind::Algebraic).count();
        if algebraic != constraints.len() {
            return Err(SchemaError::NonSquare {
                algebraic,
                constraints: constraints.len(),
            });
        }

        let mut exact = BTreeMap::new();
        let exact_ctx = ParseContext::new(&raw.indep_var).with_known(definitions.keys().cloned());
        for (name, text) in &raw.exact {
            if !variables.iter().any(|v| &v.id == name) && !names.contains(name) {
                return Err(SchemaError::UnknownVariable(name.clone()));
            }
            let e = parse_with(text, &exact_ctx).map_err(|source| SchemaError::Parse {
                what: format!("exact solution of `{name}`"),
                source,
            })?;
            exact.insert(name.clone(), e);
        }

        Ok(Self {
            name: raw.name,
            indep_var: raw.indep_var,
            expansion_point: raw.expansion_point,
            order: raw.order,
            alpha,
            fractional_rule: raw.fractional_rule,
            variables,
            equations,
            constraints,
            definitions,
            exact,
        })
    }

    fn to_raw(&self) -> RawSpec {
        let show = |e: &Expr| e.display_with(&self.indep_var).to_string();
        let order_of = |o: DiffOrder| match o {
            DiffOrder::Integer(m) => RawOrder::Number(m as f64),
            DiffOrder::Alpha => RawOrder::Text("alpha".into()),
        };
        RawSpec {
            name: self.name.clone(),
            indep_var: self.indep_var.clone(),
            expansion_point: self.expansion_point,
            order: self.order,
            alpha: self.alpha.map(|a| RawOrder::Text(a.to_string())),
            fractional_rule: self.fractional_rule,
            variables: self
                .variables
                .iter()
                .map(|v| RawVariable {
                    id: v.id.clone(),
                    kind: v.kind,
                    deriv_order: self.equation(&v.id).map(|e| order_of(e.order)),
                    initial: v.initial.clone(),
                })
                .collect(),
            equations: self
                .equations
                .iter()
                .map(|e| RawEquation {
                    lhs: RawLhs {
                        var: e.var.clone(),
                        order: order_of(e.order),
                    },
                    rhs: show(&e.rhs),
                })
                .collect(),
            constraints: self.constraints.iter().map(show).collect(),
            definitions: self.definitions.iter().map(|(k, e)| (k.clone(), show(e))).collect(),
            exact: self.exact.iter().map(|(k, e)| (k.clone(), show(e))).collect(),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self.to_raw()).expect("spec serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("spec serializes")
    }

    pub fn equation(&self, var: &str) -> Option<&Equation> {
        self.equations.iter().find(|e| e.var == var)
    }

    pub fn variable(&self, id: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == id)
    }

    pub fn algebraic(&self) -> impl Iterator<Item = &Variable> {
        self.variables.iter().filter(|v| v.kind == VarKind::Algebraic)
    }

    pub fn differential(&self) -> impl Iterator<Item = &Variable> {
        self.variables.iter().filter(|v| v.kind == VarKind::Differential)
    }

    /// Whether any equation carries the fractional order.
    pub fn uses_alpha(&self) -> bool {
        self.equations.iter().any(|e| e.order == DiffOrder::Alpha)
    }

    /// Effective fractional order; `None` on the integer grid.
    pub fn effective_alpha(&self) -> Option<FracOrder> {
        self.alpha.filter(|a| self.uses_alpha() && !a.is_one())
    }

    /// Grid denominator `q` of the solution series.
    pub fn grid_denominator(&self) -> u32 {
        match (self.effective_alpha(), self.fractional_rule) {
            (Some(a), FractionalRule::CaputoGrid) => a.denom(),
            _ => 1,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_alpha(mut self, alpha: FracOrder) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_fractional_rule(mut self, rule: FractionalRule) -> Self {
        self.fractional_rule = rule;
        self
    }
}
