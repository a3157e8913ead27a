//! Formal power series solver for a locally linearizable convex billiard.
//!
//! The billiard table is described by the support function `q(t)`; the local
//! conjugacy to a rigid rotation is described by a bivariate series
//! `phi(z, zbar)`. The pair must satisfy the functional equation
//!
//! ```text
//! E(q, phi) = d2_S(phi^-, phi) + d1_S(phi, phi^+) = 0,
//! S(t1, t2)  = q((t1 + t2)/2) * cos((t1 - t2)/2),
//! ```
//!
//! where `phi^±(z, zbar) = phi(lambda^{±1} z, lambda^{∓1} zbar)` and
//! `lambda = e^{i theta}` is a Diophantine rotation. This crate computes the
//! truncated series solution two independent ways (a quadratically convergent
//! iteration and a degree-by-degree direct solve), verifies the operator
//! identities the construction rests on, and measures the Gevrey growth of
//! the resulting coefficients.
//!
//! Everything runs at a configurable mantissa width (default 256 bits) on top
//! of MPFR; `zero_tolerance` is the single "numerically zero" contract used
//! by all residual and invariant checks.

pub mod analysis;
pub mod billiard;
pub mod driver;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod numerics;
pub mod operators;
pub mod oracle;
pub mod outer;
pub mod series;

pub use error::{Error, Result};
pub use numerics::{zero_tolerance, Rotation, Scalar};
pub use series::{BiSeries, UniSeries};
