//! Order-by-order solution of semi-explicit DAEs in transformed space.
//!
//! Each differential variable advances explicitly: its coefficient at index
//! `j + d` comes from the transformed right-hand side at `j`. Algebraic
//! coefficients are fixed by constraints read at a shifted order, the first
//! order whose coefficient actually sees them; the planner finds that shift by
//! probing, and the solver enforces it with a small Newton iteration per order.

mod machine;
mod plan;
mod solve;
mod spec;

use thiserror::Error;

use crate::expr::{ParseError, TransformError};
use crate::series::SeriesError;

pub use plan::{plan, ConstraintBinding, RecurrencePlan, Step, UpdateKind, UpdateRule};
pub use solve::{solve, solve_fractional, verify_constraints, SolveReport};
pub use spec::{DiffOrder, Equation, FracOrder, FractionalRule, ProblemSpec, VarKind, Variable, MAX_GRID};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("malformed problem description: {0}")]
    Json(String),
    #[error("{what}: {source}")]
    Parse { what: String, source: ParseError },
    #[error("`{0}` is not a usable identifier")]
    InvalidIdentifier(String),
    #[error("`{0}` is declared more than once")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("differential variable `{0}` has no equation")]
    MissingEquation(String),
    #[error("variable `{0}` has more than one equation")]
    DuplicateEquation(String),
    #[error("algebraic variable `{0}` cannot have a differential equation")]
    EquationForAlgebraic(String),
    #[error("`{var}` needs {expected} initial value(s), got {found}")]
    InitialData { var: String, expected: usize, found: usize },
    #[error("{algebraic} algebraic variable(s) but {constraints} constraint(s)")]
    NonSquare { algebraic: usize, constraints: usize },
    #[error("unsupported derivative order {0}")]
    UnsupportedOrder(String),
    #[error("all fractional derivatives must share one order")]
    MixedAlpha,
    #[error("truncation order must be at least 1")]
    InvalidTruncation,
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("while probing: {0}")]
    Transform(#[from] TransformError),
    #[error("no constraint determines `{var}` within {cap} orders")]
    IndexTooHigh { var: String, cap: usize },
    #[error("constraint {constraint} bound to `{var}` depends on later coefficients")]
    Cyclic { var: String, constraint: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("Newton iteration failed at order {order} after {iterations} iterations, residual {residual:e}")]
    Newton {
        order: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("singular constraint Jacobian at order {order}")]
    SingularJacobian { order: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("initial data violate constraint {constraint} at order {order} (coefficient {residual:e})")]
    InconsistentInitialData {
        constraint: usize,
        order: usize,
        residual: f64,
    },
}
