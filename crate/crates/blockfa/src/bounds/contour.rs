//! Closed integration contours built from line and arc segments, including
//! the Pac-Man contour, with closure and enclosure (winding) checks.

use crate::error::{Error, Result};
use crate::linalg::{Cpx, SpectrumInterval};
use std::f64::consts::PI;

/// One smooth piece of a contour, parameterized on t ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line {
        from: Cpx,
        to: Cpx,
    },
    /// Circular arc center + r e^{iθ}, θ from `from_angle` to `to_angle`
    /// (counterclockwise when to_angle > from_angle).
    Arc {
        center: Cpx,
        radius: f64,
        from_angle: f64,
        to_angle: f64,
    },
}

impl Segment {
    pub fn point(&self, t: f64) -> Cpx {
        match *self {
            Segment::Line { from, to } => from + (to - from).scale(t),
            Segment::Arc {
                center,
                radius,
                from_angle,
                to_angle,
            } => {
                let theta = from_angle + t * (to_angle - from_angle);
                center + Cpx::from_polar(radius, theta)
            }
        }
    }

    /// |z'(t)|, constant for both segment kinds.
    pub fn speed(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc {
                radius,
                from_angle,
                to_angle,
                ..
            } => radius * (to_angle - from_angle).abs(),
        }
    }

    pub fn length(&self) -> f64 {
        self.speed()
    }

    /// Split into two halves at t = 1/2, preserving the trace.
    pub fn bisect(&self) -> (Segment, Segment) {
        match *self {
            Segment::Line { from, to } => {
                let mid = (from + to).scale(0.5);
                (
                    Segment::Line { from, to: mid },
                    Segment::Line { from: mid, to },
                )
            }
            Segment::Arc {
                center,
                radius,
                from_angle,
                to_angle,
            } => {
                let mid = 0.5 * (from_angle + to_angle);
                (
                    Segment::Arc {
                        center,
                        radius,
                        from_angle,
                        to_angle: mid,
                    },
                    Segment::Arc {
                        center,
                        radius,
                        from_angle: mid,
                        to_angle,
                    },
                )
            }
        }
    }
}

/// One closed curve. `negligible` marks curves on which the integrand is
/// identically zero (the left curve of a step/sign contour); they still
/// count toward enclosure but are skipped by quadrature.
#[derive(Debug, Clone)]
pub struct Curve {
    pub segments: Vec<Segment>,
    pub negligible: bool,
}

/// A union of simple closed curves.
#[derive(Debug, Clone)]
pub struct Contour {
    pub curves: Vec<Curve>,
}

/// Samples per segment used for winding and distance checks.
const CHECK_SAMPLES: usize = 128;

impl Contour {
    pub fn single(segments: Vec<Segment>) -> Self {
        Contour {
            curves: vec![Curve {
                segments,
                negligible: false,
            }],
        }
    }

    /// Counterclockwise circle.
    pub fn circle(center: Cpx, radius: f64) -> Self {
        Contour::single(vec![Segment::Arc {
            center,
            radius,
            from_angle: 0.0,
            to_angle: 2.0 * PI,
        }])
    }

    /// Total arc length over all curves, including negligible ones.
    pub fn length(&self) -> f64 {
        self.curves
            .iter()
            .flat_map(|c| &c.segments)
            .map(Segment::length)
            .sum()
    }

    /// Checks that every curve closes up to a relative 1e-12 gap.
    pub fn validate_closed(&self) -> Result<()> {
        for curve in &self.curves {
            assert!(!curve.segments.is_empty(), "curve with no segments");
            let scale = curve
                .segments
                .iter()
                .map(|s| s.point(0.0).norm().max(s.point(1.0).norm()))
                .fold(1.0f64, f64::max);
            for (i, seg) in curve.segments.iter().enumerate() {
                let next = &curve.segments[(i + 1) % curve.segments.len()];
                let gap = (seg.point(1.0) - next.point(0.0)).norm();
                if gap > 1e-12 * scale {
                    return Err(Error::ContourDoesNotEnclose {
                        point: seg.point(1.0),
                        detail: format!("curve not closed: gap {gap:.3e} after segment {i}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Winding number of the whole contour about p, by sampled angle
    /// accumulation. Exact for points away from the trace.
    pub fn winding_number(&self, p: Cpx) -> i32 {
        let mut total = 0.0;
        for curve in &self.curves {
            for seg in &curve.segments {
                let mut prev = (seg.point(0.0) - p).arg();
                for j in 1..=CHECK_SAMPLES {
                    let t = j as f64 / CHECK_SAMPLES as f64;
                    let ang = (seg.point(t) - p).arg();
                    let mut delta = ang - prev;
                    if delta > PI {
                        delta -= 2.0 * PI;
                    } else if delta < -PI {
                        delta += 2.0 * PI;
                    }
                    total += delta;
                    prev = ang;
                }
            }
        }
        (total / (2.0 * PI)).round() as i32
    }

    pub fn encloses(&self, p: Cpx) -> bool {
        self.winding_number(p) == 1
    }

    /// Minimum sampled distance from the contour trace to a set of real
    /// spectrum intervals.
    pub fn min_distance_to(&self, intervals: &[SpectrumInterval]) -> f64 {
        let mut best = f64::INFINITY;
        for curve in &self.curves {
            for seg in &curve.segments {
                for j in 0..=CHECK_SAMPLES {
                    let z = seg.point(j as f64 / CHECK_SAMPLES as f64);
                    for iv in intervals {
                        best = best.min(iv.distance(z));
                    }
                }
            }
        }
        best
    }

    /// Every segment split in two; the trace (and so the integral) is
    /// unchanged. Used to test reparameterization invariance.
    pub fn refined(&self) -> Contour {
        Contour {
            curves: self
                .curves
                .iter()
                .map(|c| Curve {
                    segments: c
                        .segments
                        .iter()
                        .flat_map(|s| {
                            let (a, b) = s.bisect();
                            [a, b]
                        })
                        .collect(),
                    negligible: c.negligible,
                })
                .collect(),
        }
    }
}

/// Parameters of the Pac-Man contour: an arc of radius R and half-angle Θ
/// about the real origin O, closed by two radial segments through O.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacManParams {
    pub origin: f64,
    pub radius: f64,
    pub theta: f64,
}

/// Build the Pac-Man contour, traversed counterclockwise: out along the
/// lower ray, around the arc from −Θ to Θ, back along the upper ray.
pub fn pacman_contour(p: &PacManParams) -> Contour {
    assert!(p.radius > 0.0, "Pac-Man radius must be positive");
    assert!(
        p.theta > 0.0 && p.theta < PI,
        "Pac-Man half-angle must lie in (0, pi)"
    );
    let o = Cpx::new(p.origin, 0.0);
    let lower = o + Cpx::from_polar(p.radius, -p.theta);
    let upper = o + Cpx::from_polar(p.radius, p.theta);
    Contour::single(vec![
        Segment::Line { from: o, to: lower },
        Segment::Arc {
            center: o,
            radius: p.radius,
            from_angle: -p.theta,
            to_angle: p.theta,
        },
        Segment::Line { from: upper, to: o },
    ])
}

/// Two-curve contour for step/sign functions on an indefinite spectrum:
/// a Pac-Man around the positive part and a circle around the negative
/// part. The circle is marked negligible (the integrand vanishes there)
/// but still participates in enclosure checks.
pub fn sign_contour(positive: &PacManParams, negative: SpectrumInterval) -> Contour {
    assert!(
        negative.hi < 0.0,
        "negative interval must lie strictly left of zero"
    );
    let mut c = pacman_contour(positive);
    let mid = 0.5 * (negative.lo + negative.hi);
    // Clear the interval by half its gap to zero without crossing the axis.
    let radius = 0.5 * (negative.hi - negative.lo) + 0.5 * negative.hi.abs();
    c.curves.push(Curve {
        segments: vec![Segment::Arc {
            center: Cpx::new(mid, 0.0),
            radius,
            from_angle: 0.0,
            to_angle: 2.0 * PI,
        }],
        negligible: true,
    });
    c
}
