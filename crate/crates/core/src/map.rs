//! Instance map of the environment.
//!
//! The environment is represented per scan: the points of the latest cloud
//! that fall within a fixed radius of the vehicle are indexed in an R-tree,
//! and the map is rebuilt from scratch on every scan instead of being fused
//! incrementally. Obstacles are point samples; the `inflation` parameter
//! converts point distance into a conservative clearance, so
//! [`InstanceMap::signed_distance`] is negative inside an inflated obstacle.
//!
//! [`MapBuffer`] keeps two maps: planners always read the previously
//! published one while the next is under construction, and the swap is a
//! single atomic publication.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rstar::RTree;
use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;

/// Unordered set of occupied points, world frame, meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

impl FromIterator<Vector3<f64>> for PointCloud {
    fn from_iter<T: IntoIterator<Item = Vector3<f64>>>(iter: T) -> Self {
        Self {
            points: iter.into_iter().collect(),
        }
    }
}

/// Spatial index over the occupied points within `radius` of `center`.
///
/// Immutable after construction and cheap to share across planner workers.
#[derive(Debug, Clone)]
pub struct InstanceMap {
    index: RTree<[f64; 3]>,
    center: Vector3<f64>,
    radius: f64,
    inflation: f64,
    bounds: Aabb,
}

impl InstanceMap {
    /// Indexes exactly the cloud points within `radius` of `center`.
    ///
    /// `inflation` is subtracted from every distance query; an empty cloud
    /// yields an empty map whose queries return the +∞ sentinel.
    pub fn build(cloud: &PointCloud, center: Vector3<f64>, radius: f64, inflation: f64) -> Self {
        let bounds = Aabb::centered(center, radius);
        Self::build_bounded(cloud, center, radius, inflation, bounds)
    }

    /// Same as [`InstanceMap::build`] but with explicit planning bounds
    /// (the default is the cube `center ± radius`).
    pub fn build_bounded(
        cloud: &PointCloud,
        center: Vector3<f64>,
        radius: f64,
        inflation: f64,
        bounds: Aabb,
    ) -> Self {
        assert!(radius > 0.0, "map radius must be positive");
        assert!(inflation >= 0.0, "inflation must be non-negative");
        let r2 = radius * radius;
        let points: Vec<[f64; 3]> = cloud
            .points
            .iter()
            .filter(|p| (*p - center).norm_squared() <= r2)
            .map(|p| [p.x, p.y, p.z])
            .collect();
        Self {
            index: RTree::bulk_load(points),
            center,
            radius,
            inflation,
            bounds,
        }
    }

    /// Empty map with the given geometry; all queries see free space.
    pub fn empty(center: Vector3<f64>, radius: f64, inflation: f64) -> Self {
        Self::build(&PointCloud::default(), center, radius, inflation)
    }

    pub fn len(&self) -> usize {
        self.index.size()
    }

    pub fn is_empty(&self) -> bool {
        self.index.size() == 0
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Distance from `p` to the nearest indexed point minus the inflation.
    ///
    /// Negative inside the inflated obstacle; +∞ when the map is empty so
    /// that exp(−d) obstacle penalties vanish naturally.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match self.index.nearest_neighbor([p.x, p.y, p.z]) {
            Some(q) => {
                let d = (p - Vector3::new(q[0], q[1], q[2])).norm();
                d - self.inflation
            }
            None => f64::INFINITY,
        }
    }

    /// Indexed points whose inflated surface is within `range` of `p`,
    /// paired with their signed distances.
    pub fn obstacles_within(&self, p: &Vector3<f64>, range: f64) -> Vec<(Vector3<f64>, f64)> {
        let r = range + self.inflation;
        let mut out: Vec<(Vector3<f64>, f64)> = self
            .index
            .locate_within_distance([p.x, p.y, p.z], r * r)
            .map(|q| {
                let q = Vector3::new(q[0], q[1], q[2]);
                ((q), (p - q).norm() - self.inflation)
            })
            .collect();
        // R-tree iteration order is not specified; sort for determinism.
        out.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.x.total_cmp(&b.0.x))
                .then(a.0.y.total_cmp(&b.0.y))
                .then(a.0.z.total_cmp(&b.0.z))
        });
        out
    }

    /// True iff the signed distance is at least `clearance` at every sample
    /// spaced at most `step` along `[a, b]`, endpoints included.
    pub fn segment_clear(
        &self,
        a: &Vector3<f64>,
        b: &Vector3<f64>,
        step: f64,
        clearance: f64,
    ) -> bool {
        assert!(step > 0.0, "sampling step must be positive");
        if self.is_empty() {
            return true;
        }
        let delta = b - a;
        let len = delta.norm();
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 0..=n {
            let p = a + delta * (i as f64 / n as f64);
            if self.signed_distance(&p) < clearance {
                return false;
            }
        }
        true
    }

    /// Minimum signed distance over samples spaced at most `step` along the
    /// polyline `waypoints`.
    pub fn polyline_clearance(&self, waypoints: &[Vector3<f64>], step: f64) -> f64 {
        assert!(step > 0.0);
        let mut min_d = f64::INFINITY;
        if waypoints.is_empty() {
            return min_d;
        }
        min_d = min_d.min(self.signed_distance(&waypoints[0]));
        for pair in waypoints.windows(2) {
            let delta = pair[1] - pair[0];
            let len = delta.norm();
            let n = (len / step).ceil().max(1.0) as usize;
            for i in 1..=n {
                let p = pair[0] + delta * (i as f64 / n as f64);
                min_d = min_d.min(self.signed_distance(&p));
            }
        }
        min_d
    }
}

/// Published map snapshot: an immutable map plus the publication counter.
#[derive(Debug, Clone)]
pub struct MapSnapshot {
    pub map: Arc<InstanceMap>,
    /// Monotonic id incremented on every swap.
    pub id: u64,
}

/// Double buffer for instance maps.
///
/// One writer rebuilds the next map while any number of readers query the
/// previously published one; [`MapBuffer::install`] is a single atomic
/// publication. Snapshots stay valid (and unchanged) after later swaps.
#[derive(Debug)]
pub struct MapBuffer {
    current: RwLock<Arc<InstanceMap>>,
    version: AtomicU64,
}

impl MapBuffer {
    pub fn new(initial: InstanceMap) -> Self {
        Self {
            current: RwLock::new(Arc::new(initial)),
            version: AtomicU64::new(0),
        }
    }

    /// The map readers should use, frozen at its publication.
    pub fn snapshot(&self) -> MapSnapshot {
        let guard = self.current.read().expect("map buffer poisoned");
        MapSnapshot {
            map: guard.clone(),
            id: self.version.load(Ordering::Acquire),
        }
    }

    /// Publishes a freshly built map, replacing the previous one.
    pub fn install(&self, map: InstanceMap) -> u64 {
        let mut guard = self.current.write().expect("map buffer poisoned");
        *guard = Arc::new(map);
        self.version.fetch_add(1, Ordering::AcqRel) + 1
    }
}

/// Seeded random world: obstacle centers uniform in a cube, each expanded to
/// a small point shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub n_obstacles: usize,
    pub cube_size: f64,
    pub obstacle_radius: f64,
    pub seed: u64,
}

impl WorldSpec {
    pub fn new(n_obstacles: usize, cube_size: f64, obstacle_radius: f64, seed: u64) -> Self {
        Self {
            n_obstacles,
            cube_size,
            obstacle_radius,
            seed,
        }
    }

    /// World bounds: the obstacle-center cube `[0, cube_size]³`.
    pub fn bounds(&self) -> Aabb {
        Aabb::new(Vector3::zeros(), Vector3::repeat(self.cube_size))
    }
}

/// Maximum spacing between neighboring shell points; keeps inflated point
/// obstacles solid for the default 0.3 m inflation.
const SHELL_SPACING: f64 = 0.4;

/// Unit directions of the point shell around each obstacle center: the
/// center itself plus a Fibonacci sphere dense enough for `radius`.
pub fn shell_directions(radius: f64) -> Vec<Vector3<f64>> {
    let surface = 4.0 * std::f64::consts::PI * radius * radius;
    let count = ((surface / (SHELL_SPACING * SHELL_SPACING)).ceil() as usize).max(26);
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut dirs = Vec::with_capacity(count + 1);
    dirs.push(Vector3::zeros());
    for i in 0..count {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * i as f64;
        dirs.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
    }
    dirs
}

/// Generates the obstacle point cloud for `spec`, deterministic per seed.
pub fn random_world(spec: &WorldSpec) -> PointCloud {
    assert!(spec.cube_size > 0.0, "cube size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dirs = shell_directions(spec.obstacle_radius);
    let mut points = Vec::with_capacity(spec.n_obstacles * dirs.len());
    for _ in 0..spec.n_obstacles {
        let center = Vector3::new(
            rng.random::<f64>() * spec.cube_size,
            rng.random::<f64>() * spec.cube_size,
            rng.random::<f64>() * spec.cube_size,
        );
        for d in &dirs {
            points.push(center + d * spec.obstacle_radius);
        }
    }
    PointCloud::new(points)
}
