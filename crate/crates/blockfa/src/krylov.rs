//! Block-Lanczos recurrence: produces the orthonormal blocks {Q_j}, the
//! recurrence coefficients {A_j}, {B_j}, and the block-tridiagonal
//! projection T, with optional full reorthogonalization.

use crate::error::{Error, Result};
use crate::linalg::{self, BlockVector, HermEig, SmallMatrix, DEFAULT_RANK_RTOL};
use crate::operator::LinearOperator;
use std::sync::OnceLock;

/// Output of [`block_lanczos`]. Immutable once built; bound evaluations at
/// different contour points may share it read-only.
pub struct LanczosDecomposition {
    n: usize,
    b: usize,
    k: usize,
    /// Q_1..Q_{k+1}, each n×b.
    q_blocks: Vec<BlockVector>,
    /// A_1..A_k, Hermitian b×b.
    a_blocks: Vec<SmallMatrix>,
    /// B_0..B_k, upper triangular b×b. B_0 is the QR factor of V.
    b_blocks: Vec<SmallMatrix>,
    reorthogonalized: bool,
    /// Set when the subspace became invariant exactly at the final
    /// iteration; Q_{k+1} and B_k are then zero.
    terminated: bool,
    t_cache: OnceLock<TCache>,
    q_cache: OnceLock<BlockVector>,
}

/// Cached eigendecomposition of T together with the two projections every
/// resolvent evaluation needs: U*E_1B_0 and the bottom block row of U.
pub struct TCache {
    pub eig: HermEig,
    /// U* E_1 B_0, (kb)×b.
    pub w1: SmallMatrix,
    /// Bottom b rows of U, b×(kb).
    pub u_bot: SmallMatrix,
    /// T was numerically real symmetric.
    pub real: bool,
}

impl LanczosDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.b
    }

    pub fn iterations(&self) -> usize {
        self.k
    }

    pub fn reorthogonalized(&self) -> bool {
        self.reorthogonalized
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn q_block(&self, j: usize) -> &BlockVector {
        &self.q_blocks[j]
    }

    pub fn a_block(&self, j: usize) -> &SmallMatrix {
        &self.a_blocks[j]
    }

    pub fn b_block(&self, j: usize) -> &SmallMatrix {
        &self.b_blocks[j]
    }

    pub fn b0(&self) -> &SmallMatrix {
        &self.b_blocks[0]
    }

    /// B_k, the terminal off-diagonal coefficient.
    pub fn b_last(&self) -> &SmallMatrix {
        &self.b_blocks[self.k]
    }

    /// Q_{k+1}.
    pub fn q_last(&self) -> &BlockVector {
        &self.q_blocks[self.k]
    }

    /// Q_1..Q_k stacked into an n×(kb) matrix (cached).
    pub fn q_stacked(&self) -> &BlockVector {
        self.q_cache.get_or_init(|| {
            let mut q = BlockVector::zeros(self.n, self.k * self.b);
            for j in 0..self.k {
                q.view_mut((0, j * self.b), (self.n, self.b))
                    .copy_from(&self.q_blocks[j]);
            }
            q
        })
    }

    /// Assemble the (kb)×(kb) Hermitian block-tridiagonal T.
    pub fn assemble_t(&self) -> SmallMatrix {
        let kb = self.k * self.b;
        let b = self.b;
        let mut t = SmallMatrix::zeros(kb, kb);
        for j in 0..self.k {
            t.view_mut((j * b, j * b), (b, b)).copy_from(&self.a_blocks[j]);
            if j + 1 < self.k {
                t.view_mut(((j + 1) * b, j * b), (b, b))
                    .copy_from(&self.b_blocks[j + 1]);
                t.view_mut((j * b, (j + 1) * b), (b, b))
                    .copy_from(&self.b_blocks[j + 1].adjoint());
            }
        }
        t
    }

    /// Eigendecomposition of T, computed once and cached.
    pub fn t_cache(&self) -> Result<&TCache> {
        if let Some(c) = self.t_cache.get() {
            return Ok(c);
        }
        let t = self.assemble_t();
        let real = t.iter().all(|c| c.im == 0.0);
        let eig = linalg::herm_eig(&t)?;
        let kb = self.k * self.b;
        let u_top = eig.vectors.view((0, 0), (self.b, kb));
        let w1 = u_top.adjoint() * &self.b_blocks[0];
        let u_bot = eig.vectors.view((kb - self.b, 0), (self.b, kb)).into_owned();
        let cache = TCache {
            eig,
            w1,
            u_bot,
            real,
        };
        let _ = self.t_cache.set(cache);
        Ok(self.t_cache.get().unwrap())
    }

    /// Ritz values (eigenvalues of T), ascending.
    pub fn ritz_values(&self) -> Result<Vec<f64>> {
        Ok(self.t_cache()?.eig.evals.iter().copied().collect())
    }

    /// Decomposition truncated to the first `k` iterations.
    pub fn prefix(&self, k: usize) -> LanczosDecomposition {
        assert!(k >= 1 && k <= self.k);
        LanczosDecomposition {
            n: self.n,
            b: self.b,
            k,
            q_blocks: self.q_blocks[..=k].to_vec(),
            a_blocks: self.a_blocks[..k].to_vec(),
            b_blocks: self.b_blocks[..=k].to_vec(),
            reorthogonalized: self.reorthogonalized,
            terminated: self.terminated && k == self.k,
            t_cache: OnceLock::new(),
            q_cache: OnceLock::new(),
        }
    }
}

impl std::fmt::Debug for LanczosDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LanczosDecomposition")
            .field("n", &self.n)
            .field("b", &self.b)
            .field("k", &self.k)
            .field("reorthogonalized", &self.reorthogonalized)
            .field("terminated", &self.terminated)
            .finish()
    }
}

/// Run k iterations of block Lanczos on (H, V).
///
/// With `reorth` set, each new block is re-projected against all previous
/// blocks, twice. When the residual block loses rank an invariant subspace
/// has been reached: the run stops early with zero Q_{k+1} and B_k, sets
/// the `terminated` flag, and `iterations()` reports the count actually
/// completed (which may be less than requested). A rank-deficient starting
/// block is still an error.
pub fn block_lanczos(
    h: &dyn LinearOperator,
    v: &BlockVector,
    k: usize,
    reorth: bool,
) -> Result<LanczosDecomposition> {
    let (n, b) = v.shape();
    assert!(k >= 1, "need at least one iteration");
    assert_eq!(h.dim(), n, "operator/block dimension mismatch");
    assert!(
        k * b <= n,
        "subspace dimension k*b = {} exceeds n = {n}",
        k * b
    );

    let (q1, b0) = linalg::qr_tall(v, DEFAULT_RANK_RTOL).map_err(|e| match e {
        Error::DegenerateBlock { column, .. } => Error::DegenerateBlock {
            column,
            iteration: Some(0),
        },
        other => other,
    })?;

    let mut q_blocks = vec![q1];
    let mut a_blocks: Vec<SmallMatrix> = Vec::with_capacity(k);
    let mut b_blocks: Vec<SmallMatrix> = vec![b0];
    let mut terminated = false;

    for j in 0..k {
        let w = h.apply(&q_blocks[j]);
        let w_scale = w.norm().max(f64::MIN_POSITIVE);
        let mut z = w;
        if j > 0 {
            z -= &q_blocks[j - 1] * b_blocks[j].adjoint();
        }
        let a_raw = q_blocks[j].adjoint() * &z;
        let a = (&a_raw + a_raw.adjoint()).scale(0.5);
        z -= &q_blocks[j] * &a;
        if reorth {
            // One full classical re-projection pass, applied twice.
            for _ in 0..2 {
                for q in &q_blocks {
                    let proj = q.adjoint() * &z;
                    z -= q * proj;
                }
            }
        } else {
            // Local re-projection against the two most recent blocks.
            // Unlike the scalar recurrence, the block recurrence loses even
            // local orthogonality when the residual block becomes graded
            // (some columns converge before others); without this pass the
            // Ritz values can escape the spectral interval, which breaks
            // functions defined only on the spectrum.
            for q in q_blocks.iter().rev().take(2) {
                let proj = q.adjoint() * &z;
                z -= q * proj;
            }
        }
        a_blocks.push(a);

        let degenerate = z.norm() <= DEFAULT_RANK_RTOL * w_scale;
        let qr = if degenerate {
            None
        } else {
            linalg::qr_tall(&z, DEFAULT_RANK_RTOL).ok()
        };
        match qr {
            Some((q_next, b_next)) => {
                q_blocks.push(q_next);
                b_blocks.push(b_next);
            }
            None => {
                // Invariant subspace reached (the residual block lost rank):
                // close the recurrence with zero terminal blocks and return
                // the iterations actually completed.
                q_blocks.push(BlockVector::zeros(n, b));
                b_blocks.push(SmallMatrix::zeros(b, b));
                terminated = true;
                break;
            }
        }
    }

    let k_done = a_blocks.len();
    Ok(LanczosDecomposition {
        n,
        b,
        k: k_done,
        q_blocks,
        a_blocks,
        b_blocks,
        reorthogonalized: reorth,
        terminated,
        t_cache: OnceLock::new(),
        q_cache: OnceLock::new(),
    })
}

/// Measured residual of the three-term recurrence,
/// F_k = H Q − Q T − Q_{k+1} B_k E_k^*, evaluated directly.
pub fn recurrence_residual(
    d: &LanczosDecomposition,
    h: &dyn LinearOperator,
) -> (BlockVector, f64) {
    let q = d.q_stacked();
    let t = d.assemble_t();
    let mut f = h.apply(q) - q * &t;
    let tail = d.q_last() * d.b_last();
    let (n, b, k) = (d.n(), d.block_size(), d.iterations());
    let mut view = f.view_mut((0, (k - 1) * b), (n, b));
    view -= &tail;
    let nrm = f.norm();
    (f, nrm)
}
