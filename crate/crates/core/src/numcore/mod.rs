//! Scalar normal functions and symmetric-matrix algebra.

pub mod linalg;
pub mod normal;
pub mod sym;

pub use normal::{std_gauss, GaussKind};
pub use sym::{gram, span_residual, theta_inner, InnerProductContext, SpanProjection, SymMatrix};

/// Default relative tolerance for span membership: residual ≤ tol·(1 + ‖M‖_F).
pub const DEFAULT_SPAN_TOL: f64 = 1e-8;
