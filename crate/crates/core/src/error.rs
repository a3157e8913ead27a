//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// `lambda^k = 1` at working precision for some `k` up to the power cap.
    #[error("resonant rotation: |lambda^{k} - 1| = {margin:e} is below tolerance")]
    ResonantRotation { k: usize, margin: f64 },

    #[error("series max_degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },

    /// Constant term numerically zero where a unit is required.
    #[error("series is not a unit: |constant term| = {magnitude:e}")]
    NonUnit { magnitude: f64 },

    #[error("composition argument has nonzero constant term: {magnitude:e}")]
    NonzeroConstantTerm { magnitude: f64 },

    /// A small-divisor inverse was fed a resonant coefficient above tolerance;
    /// this means a projection is missing upstream.
    #[error("resonant coefficient at (j={j}, k={k}) above tolerance: {magnitude:e}")]
    ResonantInput { j: usize, k: usize, magnitude: f64 },

    #[error("off-diagonal coefficient at (j={j}, k={k}) above tolerance: {magnitude:e}")]
    NonDiagonalInput { j: usize, k: usize, magnitude: f64 },

    #[error("phi is not an admissible seed: degree-1 part must be z + zbar")]
    BadSeed,

    #[error("pivot |P[{j},{j}]| = {actual:e} under half the triangular lower bound {bound:e}")]
    DegeneratePivot { j: usize, actual: f64, bound: f64 },

    #[error("verification failed: {what} defect {defect:e} exceeds {tolerance:e}")]
    VerificationFailed {
        what: String,
        defect: f64,
        tolerance: f64,
    },

    #[error("billiard map root finder did not converge in {iters} iterations")]
    NoRoot { iters: usize },

    #[error("direct solve: linear system singular at degree {degree}")]
    SingularDegree { degree: usize },

    /// Residual coefficients that should vanish exceed 1000x zero tolerance;
    /// the run must be restarted at higher precision.
    #[error(
        "precision collapse: residual coefficient at degree {degree} is {magnitude:e}, \
         threshold {threshold:e}"
    )]
    ToleranceCollapse {
        degree: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("insufficient data: got {got} points, need {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("expected a real value, imaginary part {imag:e} above tolerance")]
    NonRealResult { imag: f64 },

    #[error("truncation order M = {m} inadmissible (need 2 <= M and 2M <= max_degree = {max_degree})")]
    BadTruncation { m: usize, max_degree: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
