//! Convex least-squares regression on slab polytopes.
//!
//! The crate covers four pieces of work that belong together when studying
//! how the convex least-squares estimator (LSE) behaves:
//!
//! * [`geometry`]: slab polytopes, regular grid designs, uniform random
//!   designs and cube covers.
//! * [`functions`]: executable convex functions, namely the quadratic
//!   reference `‖x‖²`, its tangent-plane piecewise-affine approximants and
//!   the cos³ bump packing family used for lower-bound constructions.
//! * [`lse`]: the full, bounded and Lipschitz convex LSEs as quadratic
//!   programs over fitted values and subgradients, solved by an
//!   operator-splitting (ADMM) method with constraint generation.
//! * [`complexity`] and [`harness`]: Monte Carlo estimates of the localized
//!   Gaussian complexity `H_f(t)` and its maximiser, and replicated risk
//!   simulations with rate-exponent fits.
//!
//! ```
//! use convexreg::lse::{fit, RegressionProblem, SolverConfig, Variant};
//!
//! let problem = RegressionProblem::new(
//!     vec![vec![0.0], vec![1.0], vec![2.0]],
//!     vec![0.0, 1.0, 0.0],
//!     Variant::Full,
//! )?;
//! let fit = fit(&problem, &SolverConfig::default());
//! for theta in &fit.theta {
//!     assert!((theta - 1.0 / 3.0).abs() < 1e-6);
//! }
//! # Ok::<(), convexreg::Error>(())
//! ```

pub mod complexity;
mod error;
pub mod functions;
pub mod geometry;
pub mod harness;
pub mod lse;
pub mod rng;

pub use error::{Error, Result};
