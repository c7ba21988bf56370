//! Closed-form suprema over a spectrum interval: Q_S(w,z) for the shifted
//! error ratio and Q̃_S(z) for the resolvent norm.

use crate::error::{Error, Result};
use crate::linalg::{Cpx, SpectrumInterval};

fn check_off_interval(s: SpectrumInterval, z: Cpx) -> Result<()> {
    if z.im == 0.0 && s.contains(z.re) {
        return Err(Error::PoleInInterval { z, lo: s.lo, hi: s.hi });
    }
    Ok(())
}

/// Q_S(w, z) = sup_{x ∈ [a,b]} |x − w| / |x − z| for real w, evaluated by
/// the three-candidate closed form: the two endpoints and, when the
/// stationary point x* = (Re(z)² + Im(z)² − Re(z)·w)/(Re(z) − w) lands in
/// the interval, the interior value |z − w| / |Im(z)|.
///
/// When Re(z) = w the stationary-point formula is singular; by symmetry
/// the supremum is then attained at an endpoint and the interior candidate
/// is skipped.
pub fn q_s(s: SpectrumInterval, w: f64, z: Cpx) -> Result<f64> {
    check_off_interval(s, z)?;
    let (a, b) = (s.lo, s.hi);
    let cand_a = (a - w).abs() / (Cpx::new(a, 0.0) - z).norm();
    let cand_b = (b - w).abs() / (Cpx::new(b, 0.0) - z).norm();
    let mut best = cand_a.max(cand_b);
    if z.im != 0.0 && z.re != w {
        let x_star = (z.re * z.re + z.im * z.im - z.re * w) / (z.re - w);
        if a <= x_star && x_star <= b {
            best = best.max((z - w).norm() / z.im.abs());
        }
    }
    Ok(best)
}

/// Q̃_S(z) = sup_{x ∈ [a,b]} 1 / |x − z|: distance from z to the nearest
/// point of the interval, inverted.
pub fn q_tilde(s: SpectrumInterval, z: Cpx) -> Result<f64> {
    check_off_interval(s, z)?;
    let (a, b) = (s.lo, s.hi);
    let v = if z.re < a {
        1.0 / (Cpx::new(a, 0.0) - z).norm()
    } else if z.re > b {
        1.0 / (Cpx::new(b, 0.0) - z).norm()
    } else {
        1.0 / z.im.abs()
    };
    Ok(v)
}

/// Q over a union of disjoint intervals: the max of the per-interval sup.
pub fn q_s_set(s: &[SpectrumInterval], w: f64, z: Cpx) -> Result<f64> {
    let mut best = 0.0f64;
    for iv in s {
        best = best.max(q_s(*iv, w, z)?);
    }
    Ok(best)
}

/// Q̃ over a union of disjoint intervals.
pub fn q_tilde_set(s: &[SpectrumInterval], z: Cpx) -> Result<f64> {
    let mut best = 0.0f64;
    for iv in s {
        best = best.max(q_tilde(*iv, z)?);
    }
    Ok(best)
}
