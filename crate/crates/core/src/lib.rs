//! Approximate solutions of monotone variational inequalities
//!
//! ```text
//! find x* in X with F(x*) . (x - x*) >= 0 for all x in X
//! ```
//!
//! by a fixed-point iteration on the penalized operator
//! `F_lambda = F + lambda * P`, where `P` is a unit-norm selection from the
//! polar cone of `X` (zero inside `X`). The penalty weight stays finite; the
//! price is that the limit is only an `eps`-solution, a point of `x* + eps B`.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cones;
pub mod error;
pub mod geometry;
pub mod operators;
pub mod oracle;
mod quasi;
mod scalar;
pub mod solver;
mod vector;

pub use error::{Result, ViError};
pub use scalar::Scalar;
pub use vector::{vector, Vector};

pub use cones::{polar_cone_element, sharp_penalty, PenaltyKind, PenaltyMethod, PenaltyValue, SharpPenalty, Zone};
pub use geometry::{ConvexSet, Halfspace, Tolerances};
pub use operators::{
    builtin_problem, estimate_operator_bound, lambda_bound, orientation_margin, IterationForm,
    Operator, PenalizedOperator, Problem, ViOperator,
};
pub use oracle::{oracle_extragradient, oracle_grid, verify_eps_solution, OracleCertificate, OracleMethod};
pub use solver::{
    check_a1_a2, solve, step, theta, LambdaChoice, SolveResult, SolverConfig, StepSchedule, TraceRecord,
};

pub type Vector64 = Vector<f64>;
pub type Vector32 = Vector<f32>;
pub type ConvexSet64 = ConvexSet<f64>;
pub type ConvexSet32 = ConvexSet<f32>;
pub type ViOperator64 = ViOperator<f64>;
pub type Problem64 = Problem<f64>;
pub type PenaltyMethod64 = PenaltyMethod<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolveResult64 = SolveResult<f64>;
pub type TraceRecord64 = TraceRecord<f64>;
pub type OracleCertificate64 = OracleCertificate<f64>;

/// Crate version recorded in certificate caches and summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
