//! Convex least-squares estimators.
//!
//! The estimator over convex functions on a domain is determined at the
//! design points by the quadratic program
//!
//! ```text
//! minimize   Σ_i (Y_i − θ_i)²
//! subject to θ_j ≥ θ_i + g_i·(X_j − X_i)   for all i ≠ j
//!            |θ_i| ≤ B                     (bounded variants)
//!            ‖g_i‖₂ ≤ L                    (Lipschitz variants)
//! ```
//!
//! over fitted values `θ` and subgradients `g`. [`fit`] solves it with
//! ADMM on a working set of pairwise constraints that grows by constraint
//! generation; [`extend`] evaluates the fitted function off the design.

pub(crate) mod admm;
mod kkt;
mod problem;
mod solver;
mod univariate;

pub use kkt::{check_kkt, check_kkt_with, KktReport};
pub use problem::{ProblemFile, RegressionProblem, Variant, DUPLICATE_TOL};
pub use solver::{
    constraint_violation, extend, fit, fit_from, Diagnostics, LseFit, Method, SolverConfig,
};

pub(crate) use solver::{instance_for, solve_generated};
