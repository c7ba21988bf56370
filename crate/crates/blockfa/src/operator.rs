//! Hermitian linear operators and the dense solve oracle backing the
//! diagnostic quantities (true errors, shifted solves, induced norms).

use crate::error::{Error, Result};
use crate::linalg::{self, BlockVector, Cpx, HermEig};
use nalgebra::DVector;
use std::sync::Arc;

/// Abstract Hermitian operator with a block apply.
///
/// `diagonal`/`dense` are optional materializations used to build the solve
/// oracle; operators that expose neither cannot back the oracle-based
/// diagnostics and produce `NoOracle`.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &BlockVector) -> BlockVector;
    /// True when the operator is real symmetric (entries have no imaginary part).
    fn is_real(&self) -> bool;
    fn diagonal(&self) -> Option<&[f64]> {
        None
    }
    fn dense(&self) -> Option<BlockVector> {
        None
    }
    /// Known (λmin, λmax), if the constructor can provide them.
    fn eig_hints(&self) -> Option<(f64, f64)> {
        None
    }
}

pub type OpRef = Arc<dyn LinearOperator>;

/// Diagonal Hermitian operator with real entries.
pub struct DiagonalOp {
    entries: Vec<f64>,
}

impl DiagonalOp {
    pub fn new(entries: Vec<f64>) -> Self {
        assert!(!entries.is_empty());
        DiagonalOp { entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

impl LinearOperator for DiagonalOp {
    fn dim(&self) -> usize {
        self.entries.len()
    }

    fn apply(&self, x: &BlockVector) -> BlockVector {
        assert_eq!(x.nrows(), self.entries.len());
        let mut out = x.clone();
        for (i, &d) in self.entries.iter().enumerate() {
            for j in 0..out.ncols() {
                out[(i, j)] *= d;
            }
        }
        out
    }

    fn is_real(&self) -> bool {
        true
    }

    fn diagonal(&self) -> Option<&[f64]> {
        Some(&self.entries)
    }

    fn eig_hints(&self) -> Option<(f64, f64)> {
        let lo = self.entries.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }
}

/// Dense Hermitian operator.
pub struct DenseOp {
    matrix: BlockVector,
    real: bool,
}

impl DenseOp {
    /// The input is checked for Hermitian symmetry.
    pub fn new(matrix: BlockVector) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: matrix.ncols(),
            });
        }
        let dev = (&matrix - matrix.adjoint()).norm();
        let tol = 1e-10 * matrix.norm().max(f64::MIN_POSITIVE) * n as f64;
        if dev > tol {
            return Err(Error::NonHermitian {
                deviation: dev,
                tol,
            });
        }
        let real = matrix.iter().all(|c| c.im == 0.0);
        Ok(DenseOp { matrix, real })
    }
}

impl LinearOperator for DenseOp {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &BlockVector) -> BlockVector {
        &self.matrix * x
    }

    fn is_real(&self) -> bool {
        self.real
    }

    fn dense(&self) -> Option<BlockVector> {
        Some(self.matrix.clone())
    }
}

/// Verify X*(HY) = (HX)*Y on random probe pairs.
pub fn hermitian_probe(op: &dyn LinearOperator, probes: usize, seed: u64, tol: f64) -> bool {
    let n = op.dim();
    for p in 0..probes {
        let x = crate::testutil::rand_complex_matrix(n, 1, seed.wrapping_add(2 * p as u64));
        let y = crate::testutil::rand_complex_matrix(n, 1, seed.wrapping_add(2 * p as u64 + 1));
        let lhs = linalg::frob_inner(&x, &op.apply(&y));
        let rhs = linalg::frob_inner(&op.apply(&x), &y);
        let scale = x.norm() * y.norm();
        if (lhs - rhs).norm() > tol * scale.max(1.0) {
            return false;
        }
    }
    true
}

/// Which norm ‖·‖ the bound machinery reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMode {
    /// ‖X‖_{H−wI} = ‖(H−wI)^{1/2} X‖_F.
    ShiftedInduced(f64),
    Frobenius,
    Operator,
}

/// Full eigendecomposition of an operator, used as the direct-solve oracle
/// for shifted systems, f(H)V references, and induced norms.
///
/// For diagonal operators the eigenvector matrix is implicit (identity up to
/// ordering) and applies cost O(n b) instead of a dense gemm.
pub struct HermitianOracle {
    evals: DVector<f64>,
    /// None means the operator is diagonal and `evals` follows its layout.
    vectors: Option<BlockVector>,
}

impl HermitianOracle {
    pub fn build(op: &dyn LinearOperator) -> Result<Self> {
        if let Some(diag) = op.diagonal() {
            return Ok(HermitianOracle {
                evals: DVector::from_vec(diag.to_vec()),
                vectors: None,
            });
        }
        let Some(dense) = op.dense() else {
            return Err(Error::NoOracle { dim: op.dim() });
        };
        let HermEig { evals, vectors } = linalg::herm_eig(&dense)?;
        Ok(HermitianOracle {
            evals,
            vectors: Some(vectors),
        })
    }

    pub fn from_eig(eig: HermEig) -> Self {
        HermitianOracle {
            evals: eig.evals,
            vectors: Some(eig.vectors),
        }
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }

    pub fn evals(&self) -> &DVector<f64> {
        &self.evals
    }

    pub fn lambda_min(&self) -> f64 {
        self.evals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.evals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn to_basis(&self, x: &BlockVector) -> BlockVector {
        match &self.vectors {
            Some(u) => u.adjoint() * x,
            None => x.clone(),
        }
    }

    fn from_basis(&self, y: BlockVector) -> BlockVector {
        match &self.vectors {
            Some(u) => u * y,
            None => y,
        }
    }

    /// Apply g(H) to a block: g evaluated at each eigenvalue.
    pub fn apply_fn(&self, g: impl Fn(f64) -> Cpx, x: &BlockVector) -> BlockVector {
        let mut y = self.to_basis(x);
        for (i, &lam) in self.evals.iter().enumerate() {
            let gi = g(lam);
            for j in 0..y.ncols() {
                y[(i, j)] *= gi;
            }
        }
        self.from_basis(y)
    }

    /// (H − zI)^{-1} X.
    pub fn solve_shifted(&self, z: Cpx, x: &BlockVector) -> BlockVector {
        self.apply_fn(|lam| (Cpx::new(lam, 0.0) - z).inv(), x)
    }

    /// ‖(H−wI)^{1/2} X‖_F. Fails unless w < λmin.
    pub fn induced_norm(&self, x: &BlockVector, w: f64) -> Result<f64> {
        let mut y = self.to_basis(x);
        for (i, &lam) in self.evals.iter().enumerate() {
            let shifted = lam - w;
            if shifted <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    shift: w,
                    eigenvalue: shifted,
                });
            }
            let s = shifted.sqrt();
            for j in 0..y.ncols() {
                y[(i, j)] *= s;
            }
        }
        Ok(y.norm())
    }

    /// ‖X‖ in the requested mode.
    pub fn norm(&self, x: &BlockVector, mode: NormMode) -> Result<f64> {
        match mode {
            NormMode::ShiftedInduced(w) => self.induced_norm(x, w),
            NormMode::Frobenius => Ok(x.norm()),
            NormMode::Operator => Ok(linalg::operator_norm(x)),
        }
    }

    /// ‖h_{w,z}(H)‖₂ = max over Λ(H) of |x−w|/|x−z|.
    pub fn h_wz_opnorm(&self, w: f64, z: Cpx) -> f64 {
        self.evals
            .iter()
            .map(|&lam| {
                let x = Cpx::new(lam, 0.0);
                ((x - w) / (x - z)).norm()
            })
            .fold(0.0, f64::max)
    }
}
