//! Numerical solver for Hessian-type equations on box domains with a metric.
//!
//! The equation solved is
//!
//! ```text
//!     sigma_k( lambda( (Delta u) g - nabla^2 u + chi ) ) = f(x, u, grad u)
//! ```
//!
//! with Dirichlet data on a box, where `lambda(.)` are the eigenvalues with
//! respect to the metric `g` and the unknown is admissible (eigenvalues in the
//! Garding cone `Gamma_k`). The crate provides:
//!
//! - [`symfun`]: the scalar cone calculus (`sigma_k`, cones, the transformed
//!   operator `h` and its gradients, barrier shift search);
//! - [`geometry`]: grids, metric presets with cached Christoffel symbols,
//!   covariant operators, generalized eigenvalues;
//! - [`operator`]: pointwise operator evaluation, residuals, exact sparse
//!   linearization, subsolution checks;
//! - [`solver`]: damped Newton with an admissibility-preserving line search
//!   wrapped in a homotopy on the right-hand side, plus the maximum-principle
//!   sandwich and C1/C2 boundary diagnostics;
//! - [`verify`]: sampling-based checks of the structural identities and
//!   inequalities the continuity method rests on (Euler relations, negative-
//!   entry gradient bounds, product lower bounds, concavity, growth);
//! - [`report`]: deterministic CSV/JSON artifact writers.
//!
//! Everything is deterministic for a fixed seed and thread-count independent.

// Index-driven loops read clearest in stencil and packed-tensor code, and
// `!(x > 0.0)` is deliberate where NaN must count as a failure (`x <= 0.0`
// would silently pass it).
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod linsolve;
pub mod operator;
pub mod problem;
pub mod report;
pub mod rhs;
pub mod solver;
pub mod symfun;
pub mod verify;

pub use error::{Error, Result};
