//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the block-Lanczos pipeline and its bound machinery.
#[derive(Error, Debug)]
pub enum Error {
    /// A QR diagonal fell below tolerance: the block-Krylov subspace became
    /// degenerate (invariant subspace reached).
    #[error("degenerate block: column {column} of the QR factor is numerically zero{}",
            iteration.map(|j| format!(" (Lanczos iteration {j})")).unwrap_or_default())]
    DegenerateBlock {
        column: usize,
        iteration: Option<usize>,
    },

    #[error("matrix is not Hermitian: ‖M − M*‖_F = {deviation:.3e} exceeds tolerance {tol:.3e}")]
    NonHermitian { deviation: f64, tol: f64 },

    #[error("H − wI is not positive definite: shifted eigenvalue {eigenvalue:.6e} ≤ 0 for w = {shift}")]
    NotPositiveDefinite { shift: f64, eigenvalue: f64 },

    #[error("shift {shift} is within {distance:.3e} of an eigenvalue of T")]
    SingularShift {
        shift: num_complex::Complex<f64>,
        distance: f64,
    },

    /// `f` is not finite at some Ritz values of T.
    #[error("function `{name}` undefined at Ritz values {values:?}")]
    DomainError { name: String, values: Vec<f64> },

    #[error("C(w) is too ill-conditioned to invert: cond = {cond:.3e}")]
    IllConditionedC { cond: f64 },

    #[error("adaptive quadrature did not converge: remaining error estimate {remaining:.3e}")]
    QuadratureNoConvergence { remaining: f64 },

    #[error("pole z = {z} lies inside the spectrum interval [{lo}, {hi}]")]
    PoleInInterval {
        z: num_complex::Complex<f64>,
        lo: f64,
        hi: f64,
    },

    #[error("contour point {z} is within {distance:.3e} of the spectrum set")]
    ContourTouchesSpectrum {
        z: num_complex::Complex<f64>,
        distance: f64,
    },

    #[error("contour does not enclose the required point {point}: {detail}")]
    ContourDoesNotEnclose {
        point: num_complex::Complex<f64>,
        detail: String,
    },

    #[error("operator of dimension {dim} does not admit a direct solve oracle")]
    NoOracle { dim: usize },

    #[error("invalid shift w = {shift}: must be strictly below λmin = {lambda_min}")]
    InvalidShift { shift: f64, lambda_min: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix market parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("matrix is not Hermitian: entry ({row},{col}) deviates by {deviation:.3e}")]
    NotHermitianEntry {
        row: usize,
        col: usize,
        deviation: f64,
    },

    /// Raised by the quadratic-form bound, whose C(z̄) = conj C(z) step
    /// requires a real-symmetric problem.
    #[error("operation requires a real-symmetric problem; got a complex Hermitian one")]
    FieldUnsupported,

    #[error("invalid configuration at `{field}`: {message}")]
    ConfigError { field: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
