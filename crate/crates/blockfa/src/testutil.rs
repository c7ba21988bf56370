//! Deterministic random matrices for tests.
#![doc(hidden)]

use crate::linalg::{BlockVector, Cpx};
use crate::rng::NormalSource;

pub fn rand_real_matrix(n: usize, b: usize, seed: u64) -> BlockVector {
    let mut src = NormalSource::new(seed);
    BlockVector::from_fn(n, b, |_, _| Cpx::new(src.next_normal(), 0.0))
}

pub fn rand_complex_matrix(n: usize, b: usize, seed: u64) -> BlockVector {
    let mut src = NormalSource::new(seed);
    BlockVector::from_fn(n, b, |_, _| Cpx::new(src.next_normal(), src.next_normal()))
}

/// Random real symmetric matrix with entries scaled by 1/sqrt(n).
pub fn rand_symmetric(n: usize, seed: u64) -> BlockVector {
    let a = rand_real_matrix(n, n, seed);
    (&a + a.adjoint()).scale(0.5 / (n as f64).sqrt())
}

/// Random complex Hermitian matrix.
pub fn rand_hermitian(n: usize, seed: u64) -> BlockVector {
    let a = rand_complex_matrix(n, n, seed);
    (&a + a.adjoint()).scale(0.5 / (n as f64).sqrt())
}
