//! Time-parameterized B-spline trajectories.
//!
//! The smoothed path is already dense and dynamically feasible, so the
//! spline's job is a C² time law: a clamped uniform cubic whose control
//! points are the smoothed waypoints, with constant-speed time allocation.

use nalgebra::Vector3;
use thiserror::Error;

/// Spline degree: cubic.
pub const DEGREE: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("sample time {t} outside [0, {duration}]")]
    OutOfDomain { t: f64, duration: f64 },
}

/// Clamped cubic B-spline with a uniform interior knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline {
    knots: Vec<f64>,
    control_points: Vec<Vector3<f64>>,
    duration: f64,
}

impl BSpline {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn control_points(&self) -> &[Vector3<f64>] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Interior knot times, useful for continuity checks.
    pub fn interior_knots(&self) -> &[f64] {
        let n = self.control_points.len();
        &self.knots[DEGREE + 1..n]
    }
}

/// Fits a clamped cubic through `waypoints` (used directly as control
/// points, padded by endpoint repetition below four) with duration equal to
/// the polyline length divided by `speed`.
pub fn fit_bspline(waypoints: &[Vector3<f64>], speed: f64) -> BSpline {
    assert!(waypoints.len() >= 2, "need at least two waypoints");
    assert!(speed > 0.0, "speed must be positive");

    let mut control_points = waypoints.to_vec();
    while control_points.len() < DEGREE + 1 {
        control_points.push(*control_points.last().unwrap());
        if control_points.len() < DEGREE + 1 {
            control_points.insert(0, control_points[0]);
        }
    }

    let length: f64 = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let duration = length / speed;

    let n = control_points.len();
    let segments = n - DEGREE;
    let mut knots = Vec::with_capacity(n + DEGREE + 1);
    knots.extend(std::iter::repeat_n(0.0, DEGREE + 1));
    for i in 1..segments {
        knots.push(duration * i as f64 / segments as f64);
    }
    knots.extend(std::iter::repeat_n(duration, DEGREE + 1));

    BSpline {
        knots,
        control_points,
        duration,
    }
}

fn find_span(knots: &[f64], degree: usize, n_ctrl: usize, t: f64) -> usize {
    if t >= knots[n_ctrl] {
        return n_ctrl - 1;
    }
    let mut span = degree;
    while span + 1 < n_ctrl && knots[span + 1] <= t {
        span += 1;
    }
    span
}

fn de_boor(knots: &[f64], points: &[Vector3<f64>], degree: usize, t: f64) -> Vector3<f64> {
    let span = find_span(knots, degree, points.len(), t);
    let mut d: Vec<Vector3<f64>> = (0..=degree)
        .map(|j| points[span - degree + j])
        .collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let num = t - knots[j + span - degree];
            let den = knots[j + 1 + span - r] - knots[j + span - degree];
            let alpha = if den.abs() > 0.0 { num / den } else { 0.0 };
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    d[degree]
}

/// Control points and knots of the derivative spline (one degree lower).
fn derivative(
    knots: &[f64],
    points: &[Vector3<f64>],
    degree: usize,
) -> (Vec<f64>, Vec<Vector3<f64>>) {
    let mut d_points = Vec::with_capacity(points.len() - 1);
    for i in 0..points.len() - 1 {
        let den = knots[i + degree + 1] - knots[i + 1];
        let scale = if den.abs() > 0.0 {
            degree as f64 / den
        } else {
            0.0
        };
        d_points.push((points[i + 1] - points[i]) * scale);
    }
    (knots[1..knots.len() - 1].to_vec(), d_points)
}

/// Position, velocity and acceleration at one sample time.
pub type SplineSample = (Vector3<f64>, Vector3<f64>, Vector3<f64>);

/// Samples position, velocity and acceleration at time `t ∈ [0, duration]`.
pub fn sample(s: &BSpline, t: f64) -> Result<SplineSample, SplineError> {
    if !(0.0..=s.duration).contains(&t) {
        return Err(SplineError::OutOfDomain {
            t,
            duration: s.duration,
        });
    }
    if s.duration == 0.0 {
        // Degenerate (zero-length) trajectory: hold the point.
        return Ok((s.control_points[0], Vector3::zeros(), Vector3::zeros()));
    }
    let position = de_boor(&s.knots, &s.control_points, DEGREE, t);
    let (vk, vp) = derivative(&s.knots, &s.control_points, DEGREE);
    let velocity = de_boor(&vk, &vp, DEGREE - 1, t);
    let (ak, ap) = derivative(&vk, &vp, DEGREE - 1);
    let acceleration = de_boor(&ak, &ap, DEGREE - 2, t);
    Ok((position, velocity, acceleration))
}
