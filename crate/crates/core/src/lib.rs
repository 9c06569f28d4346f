//! Differential transform solver for nonlinear and fractional
//! differential-algebraic equations.
//!
//! Nonlinear terms are transformed with partial ordinary Bell polynomials and
//! the Faà di Bruno composition rule, so no symbolic derivatives are needed.
//! See [`engine::solve`] for the entry point and [`problems`] for the
//! built-in examples.

pub mod bell;
pub mod engine;
pub mod expr;
pub mod metrics;
pub mod problems;
pub mod series;
