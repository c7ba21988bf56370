//! Block-Lanczos matrix function approximation with computable a posteriori
//! error bounds.
//!
//! The library approximates f(H)V for a Hermitian operator H and a tall
//! block V by projecting onto a block-Krylov subspace, and bounds the
//! approximation error by the product of a contour integral (evaluated from
//! quantities the iteration already produces) and the error of an auxiliary
//! shifted linear system.
//!
//! Modules:
//! - [`linalg`]: dense kernels (tall QR, Hermitian eigensolver, norms)
//! - [`operator`]: Hermitian operators and the dense solve oracle
//! - [`krylov`]: the block-Lanczos recurrence
//! - [`fa`]: the lan_k(f) iterate, C(z), shifted errors and residuals
//! - [`bounds`]: contours, quadrature, and the error bounds
//! - [`problems`]: experiment matrices, Matrix Market I/O, random blocks
//! - [`cli`]: the config-driven experiment runner behind the `blockfa` binary

pub mod bounds;
pub mod cli;
pub mod error;
pub mod fa;
pub mod krylov;
pub mod linalg;
pub mod operator;
pub mod problems;
pub mod rng;
pub mod testutil;

pub use error::{Error, Result};
