//! Computable a posteriori error bounds for block-Lanczos-FA: the main
//! contour-integral bound, the quadratic-form bound, the residual-based
//! linear-system bound, the lookahead error estimate, the slack-ratio
//! diagnostic, and the finite-precision perturbation term.

pub mod contour;
pub mod quad;
pub mod qs;

pub use contour::{pacman_contour, sign_contour, Contour, Curve, PacManParams, Segment};
pub use quad::integrate_contour;
pub use qs::{q_s, q_s_set, q_tilde, q_tilde_set};

use crate::error::{Error, Result};
use crate::fa::{c_matrix, resolvent_coeffs, shifted_error, shifted_iterate, CwSolver, SpectralFunction};
use crate::krylov::{recurrence_residual, LanczosDecomposition};
use crate::linalg::{self, BlockVector, Cpx, SpectrumInterval};
use crate::operator::{HermitianOracle, LinearOperator, NormMode};

/// Relative margin by which the Ritz interval is inflated when the caller
/// does not supply a spectrum estimate.
pub const DEFAULT_SPECTRUM_MARGIN: f64 = 1e-2;

/// One bound evaluation at a fixed iteration count.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub k: usize,
    /// (1/2π) ∮ |f(z)| Q_S(w,z) ‖C(w)^{-1}C(z)‖₂ |dz|.
    pub integral_term: f64,
    /// ‖err_k(w)‖ (or a computable surrogate for it).
    pub linsys_term: f64,
    /// integral_term × linsys_term.
    pub computable_bound: f64,
    /// (1/2π) ∮ ‖f(z) err_k(z)‖ |dz|, oracle-backed.
    pub triangle_integral: Option<f64>,
    /// ‖f(H)V − lan_k(f)‖, oracle-backed.
    pub true_error: Option<f64>,
    /// The quadrature's own error estimate for `integral_term`.
    pub quad_error_estimate: f64,
    /// Finite-precision perturbation term, when requested.
    pub fp_extra_term: Option<f64>,
}

/// Spectrum estimate from the Ritz values of T: [min, max] inflated by
/// [`DEFAULT_SPECTRUM_MARGIN`].
pub fn default_spectrum_set(d: &LanczosDecomposition) -> Result<Vec<SpectrumInterval>> {
    let ritz = d.ritz_values()?;
    let lo = ritz.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ritz.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        SpectrumInterval::new(lo, hi).inflated(DEFAULT_SPECTRUM_MARGIN),
    ])
}

/// Enclosure and separation preconditions shared by the contour bounds:
/// every curve closed, every spectrum endpoint and Ritz value wound once,
/// and the trace strictly separated from the spectrum set.
fn check_contour(c: &Contour, s: &[SpectrumInterval], ritz: &[f64]) -> Result<()> {
    c.validate_closed()?;
    let scale = s
        .iter()
        .flat_map(|iv| [iv.lo.abs(), iv.hi.abs()])
        .fold(1.0f64, f64::max);
    let dist = c.min_distance_to(s);
    if dist <= 1e-10 * scale {
        // Locate the offending sample for the error message.
        let mut worst = Cpx::new(f64::NAN, f64::NAN);
        let mut best = f64::INFINITY;
        for curve in &c.curves {
            for seg in &curve.segments {
                for j in 0..=128 {
                    let z = seg.point(j as f64 / 128.0);
                    let dz = s.iter().map(|iv| iv.distance(z)).fold(f64::INFINITY, f64::min);
                    if dz < best {
                        best = dz;
                        worst = z;
                    }
                }
            }
        }
        return Err(Error::ContourTouchesSpectrum {
            z: worst,
            distance: dist,
        });
    }
    let mut required: Vec<f64> = s.iter().flat_map(|iv| [iv.lo, iv.hi]).collect();
    required.extend_from_slice(ritz);
    for x in required {
        let p = Cpx::new(x, 0.0);
        if c.winding_number(p) != 1 {
            return Err(Error::ContourDoesNotEnclose {
                point: p,
                detail: "spectrum point not wound exactly once".into(),
            });
        }
    }
    Ok(())
}

/// The main computable bound:
/// ‖f(H)V − lan_k(f)‖ ≤ (1/2π ∮ |f(z)| Q_S(w,z) ‖C(w)^{-1}C(z)‖₂ |dz|) · linsys.
///
/// `linsys` is the caller's value (or surrogate) for ‖err_k(w)‖ in the
/// norm of interest; the integral term is norm-independent.
pub fn error_bound_main(
    d: &LanczosDecomposition,
    s: &[SpectrumInterval],
    w: f64,
    f: &SpectralFunction,
    c: &Contour,
    linsys: f64,
    rtol: f64,
) -> Result<BoundReport> {
    check_contour(c, s, &d.ritz_values()?)?;
    let solver = CwSolver::new(d, w)?;
    let integrand = |z: Cpx| -> Result<f64> {
        Ok(f.eval(z).norm() * q_s_set(s, w, z)? * solver.ratio_norm(&c_matrix(d, z)?))
    };
    let (integral_term, quad_error_estimate) = integrate_contour(c, integrand, rtol)?;
    Ok(BoundReport {
        k: d.iterations(),
        integral_term,
        linsys_term: linsys,
        computable_bound: integral_term * linsys,
        triangle_integral: None,
        true_error: None,
        quad_error_estimate,
        fp_extra_term: None,
    })
}

/// The intermediate oracle-backed bound (1/2π) ∮ ‖f(z) err_k(z)‖ |dz|,
/// sandwiched between the true error and the computable bound.
pub fn triangle_integral(
    d: &LanczosDecomposition,
    v: &BlockVector,
    oracle: &HermitianOracle,
    f: &SpectralFunction,
    c: &Contour,
    mode: NormMode,
    rtol: f64,
) -> Result<f64> {
    let integrand = |z: Cpx| -> Result<f64> {
        let err = shifted_error(d, v, oracle, z)?;
        Ok(f.eval(z).norm() * oracle.norm(&err, mode)?)
    };
    let (value, _) = integrate_contour(c, integrand, rtol)?;
    Ok(value)
}

/// Pointwise slack between the integrands of the computable bound and the
/// triangle integral:
/// T(z) = ‖h_{w,z}(H)‖₂ ‖C(w)^{-1}C(z)‖₂ ‖err_k(w)‖ / ‖err_k(z)‖ ≥ 1.
///
/// Returns +∞ when ‖err_k(z)‖ is numerically zero.
pub fn slack_ratio(
    d: &LanczosDecomposition,
    v: &BlockVector,
    oracle: &HermitianOracle,
    solver: &CwSolver,
    z: Cpx,
    mode: NormMode,
) -> Result<f64> {
    let w = solver.w;
    let err_w = shifted_error(d, v, oracle, Cpx::new(w, 0.0))?;
    let err_z = shifted_error(d, v, oracle, z)?;
    let num = oracle.h_wz_opnorm(w, z)
        * solver.ratio_norm(&c_matrix(d, z)?)
        * oracle.norm(&err_w, mode)?;
    let den = oracle.norm(&err_z, mode)?;
    if den <= f64::MIN_POSITIVE * num.max(1.0) {
        return Ok(f64::INFINITY);
    }
    Ok(num / den)
}

/// ‖res_k(w)‖ without touching H: res_k(w) = Q_{k+1} B_k C(w) and Q_{k+1}
/// has orthonormal columns, so the norm is that of B_k C(w).
fn residual_small_factor(d: &LanczosDecomposition, w: f64) -> Result<linalg::SmallMatrix> {
    Ok(d.b_last() * c_matrix(d, Cpx::new(w, 0.0))?)
}

/// The quadratic-form bound:
/// ‖V*f(H)V − V*lan_k(f)‖₂ ≤ (1/2π ∮ |f(z)| Q̃_S(z) ‖C(w)^{-1}C(z)‖₂² |dz|) · ‖res_k(w)‖₂².
///
/// Valid only for real-symmetric problems (the derivation pairs z with z̄
/// through C(z̄) = conj C(z)); complex Hermitian input is refused.
pub fn qf_bound(
    d: &LanczosDecomposition,
    s: &[SpectrumInterval],
    w: f64,
    f: &SpectralFunction,
    c: &Contour,
    rtol: f64,
) -> Result<(f64, f64)> {
    if !d.t_cache()?.real {
        return Err(Error::FieldUnsupported);
    }
    check_contour(c, s, &d.ritz_values()?)?;
    let solver = CwSolver::new(d, w)?;
    let res_norm = linalg::operator_norm(&residual_small_factor(d, w)?);
    let integrand = |z: Cpx| -> Result<f64> {
        let ratio = solver.ratio_norm(&c_matrix(d, z)?);
        Ok(f.eval(z).norm() * q_tilde_set(s, z)? * ratio * ratio)
    };
    let (integral, quad_err) = integrate_contour(c, integrand, rtol)?;
    Ok((integral * res_norm * res_norm, quad_err * res_norm * res_norm))
}

/// Residual-based bound on the linear-system error:
/// ‖err_k(w)‖_F ≤ (λmin(H) − w)^{-1} ‖res_k(w)‖_F, requiring w < λmin.
pub fn linsys_residual_bound(d: &LanczosDecomposition, w: f64, lambda_min: f64) -> Result<f64> {
    if w >= lambda_min {
        return Err(Error::InvalidShift {
            shift: w,
            lambda_min,
        });
    }
    Ok(residual_small_factor(d, w)?.norm() / (lambda_min - w))
}

/// Lookahead error estimate for the shifted system:
/// ‖err_k(w)‖_{H−wI} ≈ ‖x_{k+d} − x_k‖_{H−wI}, computed from a single
/// (k+d)-step decomposition. Galerkin orthogonality makes the estimate a
/// lower bound on the true error in exact arithmetic.
pub fn cg_error_estimate(
    h: &dyn LinearOperator,
    v: &BlockVector,
    w: f64,
    k: usize,
    lookahead: usize,
    reorth: bool,
) -> Result<f64> {
    if lookahead == 0 {
        return Ok(0.0);
    }
    let full = crate::krylov::block_lanczos(h, v, k + lookahead, reorth)?;
    cg_error_estimate_from(&full, h, w, k)
}

/// Same estimate reusing an existing decomposition with iterations > k.
pub fn cg_error_estimate_from(
    full: &LanczosDecomposition,
    h: &dyn LinearOperator,
    w: f64,
    k: usize,
) -> Result<f64> {
    assert!(k >= 1 && k <= full.iterations());
    if k == full.iterations() {
        return Ok(0.0);
    }
    let x_far = shifted_iterate(full, Cpx::new(w, 0.0))?;
    let x_near = shifted_iterate(&full.prefix(k), Cpx::new(w, 0.0))?;
    let diff = x_far - x_near;
    // ‖D‖²_{H−wI} = Re tr(D*(H−wI)D), one operator apply.
    let hd = h.apply(&diff);
    let sq = linalg::frob_inner(&diff, &hd).re - w * diff.norm_squared();
    Ok(sq.max(0.0).sqrt())
}

/// f_k(w,z) = F_k (T−wI)^{-1}E_1B_0 C(w)^{-1}C(z) − F_k (T−zI)^{-1}E_1B_0,
/// the kernel of the finite-precision correction. Vanishes identically at
/// z = w.
pub fn fp_kernel(
    d: &LanczosDecomposition,
    f_mat: &BlockVector,
    solver: &CwSolver,
    z: Cpx,
) -> Result<BlockVector> {
    let g_w = resolvent_coeffs(d, Cpx::new(solver.w, 0.0))?;
    let ratio = solver.solve(&c_matrix(d, z)?);
    Ok(f_mat * (g_w * ratio) - f_mat * resolvent_coeffs(d, z)?)
}

/// Size of the extra finite-precision term of the perturbed bound:
/// (1/2π) ∮ |f(z)| ‖(H−zI)^{-1}‖₂ ‖f_k(w,z)‖_F |dz|, with the resolvent
/// norm bounded by Q̃_S(z).
pub fn fp_perturbation_term(
    d: &LanczosDecomposition,
    h: &dyn LinearOperator,
    s: &[SpectrumInterval],
    w: f64,
    f: &SpectralFunction,
    c: &Contour,
    rtol: f64,
) -> Result<f64> {
    let (f_mat, _) = recurrence_residual(d, h);
    let solver = CwSolver::new(d, w)?;
    let g_w = resolvent_coeffs(d, Cpx::new(w, 0.0))?;
    let a = &f_mat * &g_w;
    let integrand = |z: Cpx| -> Result<f64> {
        let ratio = solver.solve(&c_matrix(d, z)?);
        let kernel = &a * ratio - &f_mat * resolvent_coeffs(d, z)?;
        Ok(f.eval(z).norm() * q_tilde_set(s, z)? * kernel.norm())
    };
    let (value, _) = integrate_contour(c, integrand, rtol)?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fa::lanczos_fa;
    use crate::krylov::block_lanczos;
    use crate::operator::DiagonalOp;
    use crate::testutil::{rand_hermitian, rand_real_matrix};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn linspace_diag(n: usize, lo: f64, hi: f64) -> DiagonalOp {
        DiagonalOp::new(
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        )
    }

    struct Setup {
        h: DiagonalOp,
        v: BlockVector,
        oracle: HermitianOracle,
        s: Vec<SpectrumInterval>,
        contour: Contour,
    }

    fn sqrt_setup(n: usize, b: usize) -> Setup {
        let h = linspace_diag(n, 1e-2, 1.0);
        let v = rand_real_matrix(n, b, 11);
        let oracle = HermitianOracle::build(&h).unwrap();
        let s = vec![SpectrumInterval::new(1e-2, 1.0)];
        let contour = pacman_contour(&PacManParams {
            origin: 1e-4,
            radius: 4.0,
            theta: 3.0 * PI / 4.0,
        });
        Setup {
            h,
            v,
            oracle,
            s,
            contour,
        }
    }

    #[test]
    fn bound_dominates_true_error_on_sqrt_problem() {
        let su = sqrt_setup(200, 2);
        let f = SpectralFunction::sqrt();
        let w = 0.0;
        let mode = NormMode::ShiftedInduced(w);
        let exact = su.oracle.apply_fn(|x| Cpx::new(x.sqrt(), 0.0), &su.v);
        for k in [5, 10, 20, 30] {
            let d = block_lanczos(&su.h, &su.v, k, true).unwrap();
            let err_w = shifted_error(&d, &su.v, &su.oracle, Cpx::new(w, 0.0)).unwrap();
            let linsys = su.oracle.norm(&err_w, mode).unwrap();
            let rep = error_bound_main(&d, &su.s, w, &f, &su.contour, linsys, 1e-6).unwrap();
            let true_err = su
                .oracle
                .norm(&(exact.clone() - lanczos_fa(&d, &f).unwrap()), mode)
                .unwrap();
            assert!(
                rep.computable_bound >= true_err * (1.0 - 1e-6),
                "k = {k}: bound {} < true {true_err}",
                rep.computable_bound
            );
        }
    }

    #[test]
    fn sandwich_ordering_holds() {
        let su = sqrt_setup(150, 2);
        let f = SpectralFunction::sqrt();
        let w = 0.0;
        let mode = NormMode::ShiftedInduced(w);
        let exact = su.oracle.apply_fn(|x| Cpx::new(x.sqrt(), 0.0), &su.v);
        for k in [8, 16] {
            let d = block_lanczos(&su.h, &su.v, k, true).unwrap();
            let err_w = shifted_error(&d, &su.v, &su.oracle, Cpx::new(w, 0.0)).unwrap();
            let linsys = su.oracle.norm(&err_w, mode).unwrap();
            let rep = error_bound_main(&d, &su.s, w, &f, &su.contour, linsys, 1e-6).unwrap();
            let tri =
                triangle_integral(&d, &su.v, &su.oracle, &f, &su.contour, mode, 1e-6).unwrap();
            let true_err = su
                .oracle
                .norm(&(exact.clone() - lanczos_fa(&d, &f).unwrap()), mode)
                .unwrap();
            let slack = 1.0 + 1e-6;
            assert!(true_err <= tri * slack, "k = {k}: {true_err} > {tri}");
            assert!(
                tri <= rep.computable_bound * slack,
                "k = {k}: {tri} > {}",
                rep.computable_bound
            );
        }
    }

    #[test]
    fn zero_function_gives_zero_bound() {
        let su = sqrt_setup(60, 2);
        let d = block_lanczos(&su.h, &su.v, 6, true).unwrap();
        let rep = error_bound_main(
            &d,
            &su.s,
            0.0,
            &SpectralFunction::constant(0.0),
            &su.contour,
            1.0,
            1e-6,
        )
        .unwrap();
        assert_eq!(rep.computable_bound, 0.0);
    }

    #[test]
    fn bound_is_proportional_to_linsys_term() {
        let su = sqrt_setup(60, 2);
        let d = block_lanczos(&su.h, &su.v, 8, true).unwrap();
        let f = SpectralFunction::sqrt();
        let r1 = error_bound_main(&d, &su.s, 0.0, &f, &su.contour, 1.0, 1e-6).unwrap();
        let r2 = error_bound_main(&d, &su.s, 0.0, &f, &su.contour, 2.0, 1e-6).unwrap();
        assert_eq!(r2.computable_bound, 2.0 * r1.computable_bound);
        assert_eq!(r1.integral_term, r2.integral_term);
    }

    #[test]
    fn contour_must_enclose_ritz_values() {
        let su = sqrt_setup(60, 2);
        let d = block_lanczos(&su.h, &su.v, 8, true).unwrap();
        let tiny = pacman_contour(&PacManParams {
            origin: 0.4,
            radius: 0.05,
            theta: PI / 2.0,
        });
        match error_bound_main(&d, &su.s, 0.0, &SpectralFunction::sqrt(), &tiny, 1.0, 1e-6) {
            Err(Error::ContourDoesNotEnclose { .. } | Error::ContourTouchesSpectrum { .. }) => {}
            other => panic!("expected enclosure failure, got {other:?}"),
        }
    }

    #[test]
    fn slack_ratio_at_least_one_and_exactly_one_at_w() {
        let su = sqrt_setup(120, 2);
        let d = block_lanczos(&su.h, &su.v, 12, true).unwrap();
        let w = 0.0;
        let mode = NormMode::ShiftedInduced(w);
        let solver = CwSolver::new(&d, w).unwrap();
        let t_w = slack_ratio(&d, &su.v, &su.oracle, &solver, Cpx::new(w, 0.0), mode).unwrap();
        assert_relative_eq!(t_w, 1.0, epsilon = 1e-10);
        // Sample z near the spectrum: far away C(z) underflows and the
        // ratio degenerates to rounding noise.
        let mut rng = crate::rng::NormalSource::new(3);
        for _ in 0..50 {
            let z = Cpx::new(
                0.5 + 0.5 * rng.next_normal(),
                (0.05 + 0.4 * rng.next_normal().abs()) * rng.next_normal().signum(),
            );
            let t = slack_ratio(&d, &su.v, &su.oracle, &solver, z, mode).unwrap();
            assert!(t >= 1.0 - 1e-10, "T({z}) = {t}");
        }
    }

    #[test]
    fn qf_bound_dominates_quadratic_form_error() {
        let h = linspace_diag(200, 1e-2, 1.0);
        let v = rand_real_matrix(200, 2, 5);
        let oracle = HermitianOracle::build(&h).unwrap();
        let s = vec![SpectrumInterval::new(1e-2, 1.0)];
        let c = pacman_contour(&PacManParams {
            origin: 0.0,
            radius: 2.0,
            theta: PI / 2.0,
        });
        let f = SpectralFunction::inv_sqrt();
        let exact_qf = v.adjoint() * oracle.apply_fn(|x| Cpx::new(1.0 / x.sqrt(), 0.0), &v);
        for k in [6, 12, 20] {
            let d = block_lanczos(&h, &v, k, true).unwrap();
            let approx = crate::fa::quadratic_form_approx(&d, &f).unwrap();
            let true_err = linalg::operator_norm(&(exact_qf.clone() - approx));
            let (bound, _) = qf_bound(&d, &s, 0.0, &f, &c, 1e-6).unwrap();
            assert!(bound >= true_err * (1.0 - 1e-6), "k = {k}: {bound} < {true_err}");
        }
    }

    #[test]
    fn qf_bound_rejects_complex_hermitian() {
        let m = rand_hermitian(30, 7);
        let h = crate::operator::DenseOp::new(m).unwrap();
        let v = rand_real_matrix(30, 2, 8);
        let d = block_lanczos(&h, &v, 5, true).unwrap();
        let s = default_spectrum_set(&d).unwrap();
        let ritz = d.ritz_values().unwrap();
        let span = ritz.last().unwrap() - ritz.first().unwrap();
        let c = Contour::circle(
            Cpx::new(0.5 * (ritz.first().unwrap() + ritz.last().unwrap()), 0.0),
            span.max(1.0) * 2.0,
        );
        match qf_bound(&d, &s, ritz[0] - 1.0, &SpectralFunction::sqrt(), &c, 1e-6) {
            Err(Error::FieldUnsupported) => {}
            other => panic!("expected FieldUnsupported, got {other:?}"),
        }
    }

    #[test]
    fn qf_bound_scales_quadratically_in_v() {
        let h = linspace_diag(80, 0.1, 1.0);
        let v = rand_real_matrix(80, 2, 2);
        let s = vec![SpectrumInterval::new(0.1, 1.0)];
        let c = pacman_contour(&PacManParams {
            origin: 0.0,
            radius: 2.0,
            theta: PI / 2.0,
        });
        let f = SpectralFunction::inv_sqrt();
        let d1 = block_lanczos(&h, &v, 6, true).unwrap();
        let d2 = block_lanczos(&h, &v.map(|e| e * 2.0), 6, true).unwrap();
        let (b1, _) = qf_bound(&d1, &s, 0.0, &f, &c, 1e-8).unwrap();
        let (b2, _) = qf_bound(&d2, &s, 0.0, &f, &c, 1e-8).unwrap();
        assert_relative_eq!(b2, 4.0 * b1, max_relative = 1e-9);
    }

    #[test]
    fn linsys_residual_bound_identity_case() {
        // H = I, w = 0: the bound equals ‖res_k(0)‖_F and err = res.
        let h = DiagonalOp::new(vec![1.0; 12]);
        let v = rand_real_matrix(12, 2, 4);
        // H = I makes the subspace invariant after one iteration.
        let d = block_lanczos(&h, &v, 1, true).unwrap();
        let res = crate::fa::residual_via_identity(&d, Cpx::new(0.0, 0.0)).unwrap();
        let bound = linsys_residual_bound(&d, 0.0, 1.0).unwrap();
        assert_relative_eq!(bound, res.norm(), max_relative = 1e-12);
    }

    #[test]
    fn linsys_residual_bound_dominates_oracle_error() {
        let h = linspace_diag(100, 0.5, 2.0);
        let v = rand_real_matrix(100, 2, 6);
        let oracle = HermitianOracle::build(&h).unwrap();
        for k in [3, 6, 10] {
            let d = block_lanczos(&h, &v, k, true).unwrap();
            let err = shifted_error(&d, &v, &oracle, Cpx::new(0.0, 0.0)).unwrap();
            let bound = linsys_residual_bound(&d, 0.0, 0.5).unwrap();
            assert!(bound >= err.norm() * (1.0 - 1e-10), "k = {k}");
        }
    }

    #[test]
    fn linsys_residual_bound_rejects_bad_shift() {
        let h = linspace_diag(20, 0.5, 2.0);
        let v = rand_real_matrix(20, 1, 6);
        let d = block_lanczos(&h, &v, 3, true).unwrap();
        assert!(matches!(
            linsys_residual_bound(&d, 0.5, 0.5),
            Err(Error::InvalidShift { .. })
        ));
    }

    #[test]
    fn cg_estimate_zero_lookahead_is_zero() {
        let h = linspace_diag(30, 0.5, 2.0);
        let v = rand_real_matrix(30, 1, 1);
        assert_eq!(cg_error_estimate(&h, &v, 0.0, 5, 0, true).unwrap(), 0.0);
    }

    #[test]
    fn cg_estimate_exact_at_grade() {
        // n = 10, b = 1: k + d = 10 reaches the grade, so the estimate
        // equals the true (H−wI)-norm error at k.
        let h = linspace_diag(10, 1.0, 2.0);
        let v = rand_real_matrix(10, 1, 9);
        let oracle = HermitianOracle::build(&h).unwrap();
        let w = 0.0;
        let k = 4;
        let est = cg_error_estimate(&h, &v, w, k, 6, true).unwrap();
        let d = block_lanczos(&h, &v, k, true).unwrap();
        let err = shifted_error(&d, &v, &oracle, Cpx::new(w, 0.0)).unwrap();
        let truth = oracle.norm(&err, NormMode::ShiftedInduced(w)).unwrap();
        assert_relative_eq!(est, truth, max_relative = 1e-9);
    }

    #[test]
    fn cg_estimate_is_a_lower_bound() {
        let h = linspace_diag(150, 1e-2, 1.0);
        let v = rand_real_matrix(150, 2, 12);
        let oracle = HermitianOracle::build(&h).unwrap();
        let w = 0.0;
        for k in [5, 10, 15] {
            let est = cg_error_estimate(&h, &v, w, k, 5, true).unwrap();
            let d = block_lanczos(&h, &v, k, true).unwrap();
            let err = shifted_error(&d, &v, &oracle, Cpx::new(w, 0.0)).unwrap();
            let truth = oracle.norm(&err, NormMode::ShiftedInduced(w)).unwrap();
            assert!(est <= truth * (1.0 + 1e-6), "k = {k}: {est} > {truth}");
        }
    }

    #[test]
    fn fp_kernel_vanishes_at_w() {
        let h = linspace_diag(60, 0.5, 2.0);
        let v = rand_real_matrix(60, 2, 3);
        let d = block_lanczos(&h, &v, 8, false).unwrap();
        let (f_mat, _) = recurrence_residual(&d, &h);
        let w = 0.1;
        let solver = CwSolver::new(&d, w).unwrap();
        let kernel = fp_kernel(&d, &f_mat, &solver, Cpx::new(w, 0.0)).unwrap();
        assert!(kernel.norm() <= 1e-13 * f_mat.norm().max(1e-30));
    }

    #[test]
    fn fp_term_scales_linearly_in_recurrence_residual() {
        let h = linspace_diag(60, 0.5, 2.0);
        let v = rand_real_matrix(60, 2, 3);
        let d = block_lanczos(&h, &v, 8, false).unwrap();
        let (f_mat, _) = recurrence_residual(&d, &h);
        let solver = CwSolver::new(&d, 0.1).unwrap();
        let z = Cpx::new(0.3, 1.1);
        let k1 = fp_kernel(&d, &f_mat, &solver, z).unwrap();
        let k10 = fp_kernel(&d, &f_mat.map(|e| e * 10.0), &solver, z).unwrap();
        assert_relative_eq!(k10.norm(), 10.0 * k1.norm(), max_relative = 1e-12);
    }

    #[test]
    fn fp_term_small_with_reorthogonalization() {
        let su = sqrt_setup(150, 2);
        let d = block_lanczos(&su.h, &su.v, 20, true).unwrap();
        let f = SpectralFunction::sqrt();
        let w = 0.0;
        let err_w = shifted_error(&d, &su.v, &su.oracle, Cpx::new(w, 0.0)).unwrap();
        let linsys = su.oracle.norm(&err_w, NormMode::ShiftedInduced(w)).unwrap();
        let rep = error_bound_main(&d, &su.s, w, &f, &su.contour, linsys, 1e-6).unwrap();
        let fp =
            fp_perturbation_term(&d, &su.h, &su.s, w, &f, &su.contour, 1e-4).unwrap();
        assert!(
            fp <= 1e-8 * rep.computable_bound.max(1e-300),
            "fp {fp} vs bound {}",
            rep.computable_bound
        );
    }

    #[test]
    fn bound_invariant_under_contour_refinement() {
        let su = sqrt_setup(100, 2);
        let d = block_lanczos(&su.h, &su.v, 10, true).unwrap();
        let f = SpectralFunction::sqrt();
        let r1 = error_bound_main(&d, &su.s, 0.0, &f, &su.contour, 1.0, 1e-8).unwrap();
        let r2 =
            error_bound_main(&d, &su.s, 0.0, &f, &su.contour.refined(), 1.0, 1e-8).unwrap();
        assert_relative_eq!(r1.integral_term, r2.integral_term, max_relative = 1e-7);
    }

    #[test]
    fn default_spectrum_covers_ritz_values() {
        let su = sqrt_setup(80, 2);
        let d = block_lanczos(&su.h, &su.v, 8, true).unwrap();
        let s = default_spectrum_set(&d).unwrap();
        let ritz = d.ritz_values().unwrap();
        assert!(s[0].lo < ritz[0] && s[0].hi > *ritz.last().unwrap());
    }
}
