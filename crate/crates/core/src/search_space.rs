//! Adaptive ellipsoidal search space.
//!
//! The search space between a start and a goal pose is an ellipsoid: its
//! center is the midpoint, its semi-axes come from the component-wise
//! separation (clamped below at 4 m), and its orientation rotates the unit
//! z-axis onto the start→goal direction. Sample points for the planner are
//! not drawn at random but generated as a deterministic lattice over the
//! ellipsoid interior: a non-negative grid with uniform step, mirrored into
//! all eight sign octants about the center, rotated, then filtered by
//! ellipsoid containment and map bounds.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::Aabb;

/// Lower clamp applied to every semi-axis, meters.
pub const MIN_SEMI_AXIS: f64 = 4.0;

/// Direction norms below this take the identity-rotation branch.
const PARALLEL_EPS: f64 = 1e-6;

/// Ellipsoidal search region: center, semi-axes and orientation.
///
/// The rotation maps the lattice frame onto the world frame; its third
/// column is the start→goal direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: Vector3<f64>,
    /// Semi-axes, each at least [`MIN_SEMI_AXIS`].
    pub radii: Vector3<f64>,
    /// Orthonormal, determinant +1.
    pub rotation: Matrix3<f64>,
}

impl Ellipsoid {
    /// Left side of the implicit equation after inverse-rotating `p` about
    /// the center: ≤ 1 means inside.
    pub fn containment(&self, p: &Vector3<f64>) -> f64 {
        let local = self.rotation.transpose() * (p - self.center);
        (local.x / self.radii.x).powi(2)
            + (local.y / self.radii.y).powi(2)
            + (local.z / self.radii.z).powi(2)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        self.containment(p) <= 1.0 + 1e-9
    }
}

/// Deterministic interior sample set of an [`Ellipsoid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vector3<f64>>,
    /// Generation parameter: lattice count along the shortest semi-axis.
    pub n: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rotation taking the unit z-axis onto the direction of `target`.
///
/// Identity when `target` is near zero or parallel to z; a fixed 180°
/// rotation about the x-axis when antiparallel.
pub fn rotation_between(target: &Vector3<f64>) -> Matrix3<f64> {
    let norm = target.norm();
    if norm < PARALLEL_EPS {
        return Matrix3::identity();
    }
    let dir = target / norm;
    let cos = dir.z;
    if cos > 1.0 - 1e-12 {
        return Matrix3::identity();
    }
    if cos < -1.0 + 1e-12 {
        return Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    }
    // Rodrigues form for the rotation taking e_z to dir.
    let axis = Vector3::z().cross(&dir);
    let skew = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + skew + skew * skew / (1.0 + cos)
}

/// Builds the search space between `start` and `goal`.
///
/// Direction is carried entirely by the rotation, so semi-axes take the
/// absolute separation per component before the 4 m clamp.
pub fn build_search_space(start: &Vector3<f64>, goal: &Vector3<f64>, bounds: &Aabb) -> Ellipsoid {
    debug_assert!(bounds.is_valid(), "search-space bounds are degenerate");
    let diff = goal - start;
    let radii = Vector3::new(
        diff.x.abs().max(MIN_SEMI_AXIS),
        diff.y.abs().max(MIN_SEMI_AXIS),
        diff.z.abs().max(MIN_SEMI_AXIS),
    );
    Ellipsoid {
        center: (start + goal) * 0.5,
        radii,
        rotation: rotation_between(&diff),
    }
}

/// Generates the deterministic interior point set of `e`.
///
/// Step `h = 2·min(r)/(2n+1)`; per-axis lattice counts scale with the
/// semi-axis ratios (rounded down). Each non-negative lattice offset is
/// mirrored into every sign octant about the center, rotated into the world
/// frame, and kept only if it passes ellipsoid containment and lies inside
/// `bounds`. Output order is fixed, with no duplicates.
pub fn generate_interior_points(e: &Ellipsoid, n: usize, bounds: &Aabb) -> SampleSet {
    assert!(n >= 1, "lattice parameter must be at least 1");
    let r = e.radii;
    let r_min = r.x.min(r.y).min(r.z);
    let h = 2.0 * r_min / (2 * n + 1) as f64;
    let count = |axis: f64| ((n as f64) * axis / r_min).floor() as i64;
    let (n_i, n_j, n_k) = (count(r.x), count(r.y), count(r.z));

    let mut points = Vec::new();
    for k in 0..=n_k {
        for j in 0..=n_j {
            for i in 0..=n_i {
                let base = Vector3::new(i as f64 * h, j as f64 * h, k as f64 * h);
                let inside = (base.x / r.x).powi(2)
                    + (base.y / r.y).powi(2)
                    + (base.z / r.z).powi(2);
                if inside > 1.0 {
                    continue;
                }
                // Mirror into the sign octants, skipping flips of zero
                // components so the set carries no duplicates.
                for sx in [1.0, -1.0] {
                    if i == 0 && sx < 0.0 {
                        continue;
                    }
                    for sy in [1.0, -1.0] {
                        if j == 0 && sy < 0.0 {
                            continue;
                        }
                        for sz in [1.0, -1.0] {
                            if k == 0 && sz < 0.0 {
                                continue;
                            }
                            let offset = Vector3::new(sx * base.x, sy * base.y, sz * base.z);
                            let p = e.center + e.rotation * offset;
                            if bounds.contains(&p) {
                                points.push(p);
                            }
                        }
                    }
                }
            }
        }
    }
    SampleSet { points, n }
}
