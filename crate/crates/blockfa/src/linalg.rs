//! Dense kernels: tall-skinny QR, Hermitian eigendecomposition, norms.
//!
//! Everything operates on `DMatrix<Complex<f64>>`. Real problems embed with
//! zero imaginary part; [`herm_eig`] detects that case and runs the cheaper
//! real solver internally.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type Cpx = Complex<f64>;
/// Tall n×b block of Krylov vectors, or any dense complex matrix.
pub type BlockVector = DMatrix<Cpx>;
/// Small square matrix: b×b or (kb)×(kb).
pub type SmallMatrix = DMatrix<Cpx>;

/// Default relative tolerance below which a QR diagonal signals breakdown.
pub const DEFAULT_RANK_RTOL: f64 = 1e-10;

/// A real interval [lo, hi] assumed to contain (part of) the spectrum of H.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SpectrumInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "spectrum interval requires lo <= hi");
        SpectrumInterval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from a complex point to the interval.
    pub fn distance(&self, z: Cpx) -> f64 {
        let x = z.re.clamp(self.lo, self.hi);
        (z - Cpx::new(x, 0.0)).norm()
    }

    /// Inflate by a relative margin about the midpoint-free endpoints.
    pub fn inflated(&self, rel_margin: f64) -> Self {
        let width = (self.hi - self.lo).max(self.hi.abs().max(self.lo.abs()));
        SpectrumInterval {
            lo: self.lo - rel_margin * width,
            hi: self.hi + rel_margin * width,
        }
    }
}

/// Thin QR of a tall block with the phase convention that makes the
/// factorization unique: R has a real nonnegative diagonal.
///
/// Returns `DegenerateBlock` when a diagonal entry of R falls below
/// `rtol * ‖X‖_F`, which is how Krylov breakdown surfaces.
pub fn qr_tall(x: &BlockVector, rtol: f64) -> Result<(BlockVector, SmallMatrix)> {
    let (n, b) = x.shape();
    assert!(n >= b, "qr_tall requires n >= b (got {n}x{b})");
    let scale = x.norm();
    let qr = x.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    // Make the diagonal of R real and nonnegative by moving the phase into Q.
    for j in 0..b {
        let d = r[(j, j)];
        if d.norm() <= rtol * scale {
            return Err(Error::DegenerateBlock {
                column: j,
                iteration: None,
            });
        }
        let phase = d / d.norm();
        for i in 0..n {
            q[(i, j)] *= phase;
        }
        let pc = phase.conj();
        for c in j..b {
            r[(j, c)] *= pc;
        }
        r[(j, j)] = Cpx::new(r[(j, j)].re, 0.0);
    }
    Ok((q, r))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Eigenvalues, ascending.
    pub evals: DVector<f64>,
    /// Unitary matrix of eigenvectors, columns matching `evals`.
    pub vectors: SmallMatrix,
}

/// Tolerance used by the Hermitian symmetry check, relative to ‖M‖_F.
const HERM_CHECK_RTOL: f64 = 1e-8;

/// Dense Hermitian eigendecomposition with ascending eigenvalues.
///
/// The input is checked for symmetry, then explicitly Hermitized so the
/// solver sees an exactly Hermitian matrix. Real-symmetric inputs are
/// routed through the real solver.
pub fn herm_eig(m: &SmallMatrix) -> Result<HermEig> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "herm_eig requires a square matrix");
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let dev = (m - m.adjoint()).norm();
    let tol = HERM_CHECK_RTOL * scale * n as f64;
    if dev > tol {
        return Err(Error::NonHermitian {
            deviation: dev,
            tol,
        });
    }
    let herm = (m + m.adjoint()).scale(0.5);

    let max_im = herm.iter().map(|c| c.im.abs()).fold(0.0f64, f64::max);
    let (mut evals, mut vecs): (Vec<f64>, SmallMatrix) = if max_im <= 1e-14 * scale {
        let real = herm.map(|c| c.re);
        let eig = real.symmetric_eigen();
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|v| Cpx::new(v, 0.0)),
        )
    } else {
        let eig = herm.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    // nalgebra does not sort; impose ascending order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut sorted_vecs = SmallMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vecs.column(src));
    }
    evals = sorted_vals;
    vecs = sorted_vecs;

    Ok(HermEig {
        evals: DVector::from_vec(evals),
        vectors: vecs,
    })
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<Cpx>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values[0]
}

/// trace(X* Y), the Frobenius inner product.
pub fn frob_inner(x: &DMatrix<Cpx>, y: &DMatrix<Cpx>) -> Cpx {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rand_complex_matrix, rand_real_matrix};
    use approx::assert_relative_eq;

    #[test]
    fn qr_of_orthonormal_block_is_identity() {
        // First b columns of the identity are already orthonormal.
        let n = 6;
        let b = 3;
        let mut x = BlockVector::zeros(n, b);
        for j in 0..b {
            x[(j, j)] = Cpx::new(1.0, 0.0);
        }
        let (q, r) = qr_tall(&x, DEFAULT_RANK_RTOL).unwrap();
        assert!((&q - &x).norm() < 1e-14);
        assert!((&r - SmallMatrix::identity(b, b)).norm() < 1e-14);
    }

    #[test]
    fn qr_of_scaled_basis_vector() {
        let mut x = BlockVector::zeros(3, 1);
        x[(0, 0)] = Cpx::new(2.0, 0.0);
        let (q, r) = qr_tall(&x, DEFAULT_RANK_RTOL).unwrap();
        assert_relative_eq!(q[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r[(0, 0)].re, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn qr_reassembles_random_block() {
        let x = rand_complex_matrix(50, 4, 7);
        let (q, r) = qr_tall(&x, DEFAULT_RANK_RTOL).unwrap();
        assert!((&q * &r - &x).norm() <= 1e-13 * x.norm());
        assert!((q.adjoint() * &q - SmallMatrix::identity(4, 4)).norm() <= 1e-13);
        for j in 0..4 {
            assert!(r[(j, j)].im.abs() < 1e-15);
            assert!(r[(j, j)].re >= 0.0);
        }
    }

    #[test]
    fn qr_detects_rank_deficiency() {
        let mut x = rand_complex_matrix(20, 3, 3);
        let col0 = x.column(0).into_owned();
        x.set_column(2, &col0);
        match qr_tall(&x, DEFAULT_RANK_RTOL) {
            Err(Error::DegenerateBlock { column: 2, .. }) => {}
            other => panic!("expected DegenerateBlock at column 2, got {other:?}"),
        }
    }

    #[test]
    fn qr_orthogonality_and_reassembly_over_seeds() {
        for seed in 0..100 {
            let x = rand_real_matrix(30, 3, seed);
            let (q, r) = qr_tall(&x, DEFAULT_RANK_RTOL).unwrap();
            assert!((q.adjoint() * &q - SmallMatrix::identity(3, 3)).norm() <= 1e-12);
            assert!((&q * &r - &x).norm() <= 1e-12 * x.norm());
        }
    }

    #[test]
    fn herm_eig_diagonal_permutation() {
        let m = SmallMatrix::from_diagonal(&DVector::from_vec(vec![
            Cpx::new(3.0, 0.0),
            Cpx::new(1.0, 0.0),
            Cpx::new(2.0, 0.0),
        ]));
        let eig = herm_eig(&m).unwrap();
        assert_relative_eq!(eig.evals[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(eig.evals[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(eig.evals[2], 3.0, epsilon = 1e-14);
        // Eigenvectors of a diagonal matrix form a (signed) permutation.
        for j in 0..3 {
            let col = eig.vectors.column(j);
            let big: usize = (0..3).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
            assert_relative_eq!(col[big].norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn herm_eig_two_by_two_by_hand() {
        // Characteristic polynomial (1.5-λ)² - 0.25 has roots 1 and 2.
        let m = SmallMatrix::from_row_slice(2, 2, &[
            Cpx::new(1.5, 0.0),
            Cpx::new(0.5, 0.0),
            Cpx::new(0.5, 0.0),
            Cpx::new(1.5, 0.0),
        ]);
        let eig = herm_eig(&m).unwrap();
        assert_relative_eq!(eig.evals[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(eig.evals[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn herm_eig_random_reassembly() {
        let a = rand_complex_matrix(12, 12, 11);
        let m = (&a + a.adjoint()).scale(0.5);
        let eig = herm_eig(&m).unwrap();
        let lambda = SmallMatrix::from_diagonal(&eig.evals.map(|v| Cpx::new(v, 0.0)));
        let re = &eig.vectors * &lambda * eig.vectors.adjoint();
        assert!((&re - &m).norm() <= 1e-12 * m.norm());
        assert!(
            (eig.vectors.adjoint() * &eig.vectors - SmallMatrix::identity(12, 12)).norm() <= 1e-12
        );
    }

    #[test]
    fn herm_eig_rejects_nonhermitian() {
        let m = rand_complex_matrix(5, 5, 2);
        assert!(matches!(herm_eig(&m), Err(Error::NonHermitian { .. })));
    }
}
