//! The block-Lanczos-FA iterate lan_k(f), the C(z) matrices governing the
//! residual direction, and the shifted-system error and residual blocks.

use crate::error::{Error, Result};
use crate::krylov::LanczosDecomposition;
use crate::linalg::{self, BlockVector, Cpx, SmallMatrix};
use crate::operator::{HermitianOracle, LinearOperator};
use nalgebra::SVD;
use std::sync::Arc;

type CpxFn = Arc<dyn Fn(Cpx) -> Cpx + Send + Sync>;
type DomainFn = Arc<dyn Fn(f64) -> bool + Send + Sync>;

/// A scalar function analytic on the contour interior, evaluable at
/// arbitrary complex points, with a real-axis domain predicate used to
/// validate Ritz values before forming f(T).
#[derive(Clone)]
pub struct SpectralFunction {
    name: String,
    eval: CpxFn,
    domain: DomainFn,
}

impl SpectralFunction {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(Cpx) -> Cpx + Send + Sync + 'static,
        domain: impl Fn(f64) -> bool + Send + Sync + 'static,
    ) -> Self {
        SpectralFunction {
            name: name.into(),
            eval: Arc::new(eval),
            domain: Arc::new(domain),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, z: Cpx) -> Cpx {
        (self.eval)(z)
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        (self.eval)(Cpx::new(x, 0.0)).re
    }

    /// Principal square root.
    pub fn sqrt() -> Self {
        Self::new("sqrt", |z| z.sqrt(), |x| x >= 0.0)
    }

    /// x^{-1/2} on the principal branch.
    pub fn inv_sqrt() -> Self {
        Self::new("inv_sqrt", |z| z.sqrt().inv(), |x| x > 0.0)
    }

    /// (x − w)^{-1}.
    pub fn shifted_inverse(w: f64) -> Self {
        Self::new(
            format!("shifted_inverse({w})"),
            move |z| (z - w).inv(),
            move |x| (x - w).abs() > 1e-14,
        )
    }

    /// Step function: 1 on Re(z) ≥ 0, 0 on Re(z) < 0.
    pub fn step() -> Self {
        Self::new(
            "step",
            |z| {
                if z.re >= 0.0 {
                    Cpx::new(1.0, 0.0)
                } else {
                    Cpx::new(0.0, 0.0)
                }
            },
            |_| true,
        )
    }

    /// sign(x) = 2 step(x) − 1.
    pub fn sign() -> Self {
        Self::new(
            "sign",
            |z| {
                if z.re >= 0.0 {
                    Cpx::new(1.0, 0.0)
                } else {
                    Cpx::new(-1.0, 0.0)
                }
            },
            |_| true,
        )
    }

    /// Polynomial with real coefficients, lowest degree first.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new(
            format!("polynomial(deg {})", coeffs.len().saturating_sub(1)),
            move |z| {
                let mut acc = Cpx::new(0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    acc = acc * z + c;
                }
                acc
            },
            |_| true,
        )
    }

    pub fn monomial(degree: u32) -> Self {
        Self::new(format!("x^{degree}"), move |z| z.powu(degree), |_| true)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_| Cpx::new(c, 0.0), |_| true)
    }

    fn check_domain(&self, ritz: &[f64]) -> Result<()> {
        let bad: Vec<f64> = ritz
            .iter()
            .copied()
            .filter(|&x| !(self.domain)(x) || !self.eval_real(x).is_finite())
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::DomainError {
                name: self.name.clone(),
                values: bad,
            })
        }
    }
}

/// Tolerance for a shift coinciding with a Ritz value.
fn singular_shift_tol(evals: &nalgebra::DVector<f64>) -> f64 {
    let scale = evals.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    1e-13 * scale
}

/// lan_k(f) = Q f(T) E_1 B_0, evaluated through the cached
/// eigendecomposition of T.
pub fn lanczos_fa(d: &LanczosDecomposition, f: &SpectralFunction) -> Result<BlockVector> {
    let cache = d.t_cache()?;
    let ritz: Vec<f64> = cache.eig.evals.iter().copied().collect();
    f.check_domain(&ritz)?;
    let mut g = cache.w1.clone();
    for (i, &lam) in cache.eig.evals.iter().enumerate() {
        let fi = f.eval(Cpx::new(lam, 0.0));
        for j in 0..g.ncols() {
            g[(i, j)] *= fi;
        }
    }
    let y = &cache.eig.vectors * g;
    Ok(d.q_stacked() * y)
}

/// (T − zI)^{-1} E_1 B_0 through the cached eigendecomposition; (kb)×b.
pub fn resolvent_coeffs(d: &LanczosDecomposition, z: Cpx) -> Result<SmallMatrix> {
    let cache = d.t_cache()?;
    let tol = singular_shift_tol(&cache.eig.evals);
    let mut g = cache.w1.clone();
    for (i, &lam) in cache.eig.evals.iter().enumerate() {
        let denom = Cpx::new(lam, 0.0) - z;
        if denom.norm() < tol {
            return Err(Error::SingularShift {
                shift: z,
                distance: denom.norm(),
            });
        }
        let inv = denom.inv();
        for j in 0..g.ncols() {
            g[(i, j)] *= inv;
        }
    }
    Ok(&cache.eig.vectors * g)
}

/// The block-Lanczos-FA iterate for the shifted system (H−zI)X = V,
/// i.e. Q (T − zI)^{-1} E_1 B_0.
pub fn shifted_iterate(d: &LanczosDecomposition, z: Cpx) -> Result<BlockVector> {
    Ok(d.q_stacked() * resolvent_coeffs(d, z)?)
}

/// C(u) = −E_k^*(T − uI)^{-1} E_1 B_0, b×b.
pub fn c_matrix(d: &LanczosDecomposition, u: Cpx) -> Result<SmallMatrix> {
    let cache = d.t_cache()?;
    let tol = singular_shift_tol(&cache.eig.evals);
    let mut g = cache.w1.clone();
    for (i, &lam) in cache.eig.evals.iter().enumerate() {
        let denom = Cpx::new(lam, 0.0) - u;
        if denom.norm() < tol {
            return Err(Error::SingularShift {
                shift: u,
                distance: denom.norm(),
            });
        }
        let inv = denom.inv();
        for j in 0..g.ncols() {
            g[(i, j)] *= inv;
        }
    }
    Ok(-(&cache.u_bot * g))
}

/// Condition-number cap above which C(w) is refused as a reference shift.
pub const C_COND_LIMIT: f64 = 1e12;

/// Holds the SVD of C(w) and applies C(w)^{-1} to other C(z) matrices.
pub struct CwSolver {
    svd: SVD<Cpx, nalgebra::Dyn, nalgebra::Dyn>,
    cond: f64,
    pub w: f64,
}

impl CwSolver {
    pub fn new(d: &LanczosDecomposition, w: f64) -> Result<Self> {
        let c_w = c_matrix(d, Cpx::new(w, 0.0))?;
        let svd = c_w.svd(true, true);
        let s = &svd.singular_values;
        let smin = s[s.len() - 1];
        let cond = if smin > 0.0 { s[0] / smin } else { f64::INFINITY };
        if cond > C_COND_LIMIT {
            return Err(Error::IllConditionedC { cond });
        }
        Ok(CwSolver { svd, cond, w })
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// C(w)^{-1} M.
    pub fn solve(&self, m: &SmallMatrix) -> SmallMatrix {
        self.svd
            .solve(m, 0.0)
            .expect("SVD solve cannot fail with computed factors")
    }

    /// ‖C(w)^{-1} C(z)‖₂.
    pub fn ratio_norm(&self, c_z: &SmallMatrix) -> f64 {
        linalg::operator_norm(&self.solve(c_z))
    }
}

/// res_k(z) = V − (H − zI) Q (T − zI)^{-1} E_1 B_0, by the definition
/// (one operator apply).
pub fn shifted_residual(
    d: &LanczosDecomposition,
    v: &BlockVector,
    h: &dyn LinearOperator,
    z: Cpx,
) -> Result<BlockVector> {
    let x = shifted_iterate(d, z)?;
    Ok(v - (h.apply(&x) - x.map(|e| e * z)))
}

/// res_k(z) through the residual-direction identity Q_{k+1} B_k C(z);
/// needs no operator apply. Agrees with [`shifted_residual`] in exact
/// arithmetic.
pub fn residual_via_identity(d: &LanczosDecomposition, z: Cpx) -> Result<BlockVector> {
    Ok(d.q_last() * (d.b_last() * c_matrix(d, z)?))
}

/// err_k(z) = (H − zI)^{-1} V − Q (T − zI)^{-1} E_1 B_0 via the solve
/// oracle. Diagnostic use only.
pub fn shifted_error(
    d: &LanczosDecomposition,
    v: &BlockVector,
    oracle: &HermitianOracle,
    z: Cpx,
) -> Result<BlockVector> {
    let exact = oracle.solve_shifted(z, v);
    Ok(exact - shifted_iterate(d, z)?)
}

/// V* lan_k(f) = B_0^* E_1^* f(T) E_1 B_0, the quadratic-form approximation.
pub fn quadratic_form_approx(
    d: &LanczosDecomposition,
    f: &SpectralFunction,
) -> Result<SmallMatrix> {
    let cache = d.t_cache()?;
    let ritz: Vec<f64> = cache.eig.evals.iter().copied().collect();
    f.check_domain(&ritz)?;
    let mut g = cache.w1.clone();
    for (i, &lam) in cache.eig.evals.iter().enumerate() {
        let fi = f.eval(Cpx::new(lam, 0.0));
        for j in 0..g.ncols() {
            g[(i, j)] *= fi;
        }
    }
    Ok(cache.w1.adjoint() * g)
}
