//! Geometric path planners.
//!
//! The improved RRT* draws its samples from the deterministic interior set
//! of the adaptive search ellipsoid and truncates paths at the prediction
//! horizon; the original RRT* baseline samples uniformly over the planning
//! bounds; grid A* is the deterministic baseline. The multi-instance planner
//! runs several independently seeded RRT* instances in parallel over one map
//! snapshot and picks the cheapest candidate that clears the safety margin.
//!
//! Tree edges only need to stay outside the inflated obstacles; the safety
//! margin `d_safe` is enforced where the contract asks for it: intermediate
//! goals, A* cells, and candidate selection.

mod a_star;
mod rrt_star;

pub use a_star::plan_a_star;
pub use rrt_star::{plan_rrt_star, Tree};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Aabb;
use crate::map::InstanceMap;
use crate::search_space::SampleSet;

/// Required clearance for tree edges: outside the inflated obstacle surface.
pub const EDGE_CLEARANCE: f64 = 0.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("no collision-free path found within the iteration budget")]
    PathNotFound,
    #[error("no free intermediate goal within the sample set")]
    NoFreeIntermediateGoal,
    #[error("all {0} planner instances failed")]
    AllPlannersFailed(usize),
}

/// How RRT* draws its random samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// Deterministic ellipsoid interior set (improved variant).
    EllipsoidSet,
    /// Uniform over the planning bounds (original baseline).
    UniformBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Steering step length, m.
    pub step: f64,
    /// Rewire neighborhood radius, m.
    pub rewire_radius: f64,
    pub max_iterations: usize,
    /// Goal acceptance radius, m.
    pub goal_tolerance: f64,
    /// Prediction horizon: maximum path length per planning episode, m.
    pub horizon: f64,
    /// Minimum safe clearance, m.
    pub d_safe: f64,
    /// Number of parallel planner instances.
    pub num_parallel: usize,
    pub sampler_mode: SamplerMode,
    /// Lattice parameter of the deterministic sample set.
    pub samples_n: usize,
    /// Collision-check sample spacing along segments, m.
    pub collision_step: f64,
    /// Fraction of draws biased to the goal point.
    pub goal_bias: f64,
    /// A* grid resolution, m.
    pub grid_res: f64,
    /// Planning bounds (world box).
    pub bounds: Aabb,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            rewire_radius: 2.5,
            max_iterations: 3000,
            goal_tolerance: 0.5,
            horizon: 10.0,
            d_safe: 0.5,
            num_parallel: 4,
            sampler_mode: SamplerMode::EllipsoidSet,
            samples_n: 9,
            collision_step: 0.1,
            goal_bias: 0.1,
            grid_res: 0.5,
            bounds: Aabb::new(Vector3::zeros(), Vector3::repeat(20.0)),
            seed: 0,
        }
    }
}

/// Waypoint path with its cost and the worst clearance along it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCandidate {
    pub waypoints: Vec<Vector3<f64>>,
    /// Segment lengths plus terminal distance to the goal, m.
    pub cost: f64,
    /// Minimum signed distance along the path, m.
    pub min_clearance: f64,
}

impl PathCandidate {
    /// Cumulative length of the waypoint polyline.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// Path cost: sum of consecutive segment lengths plus the distance from the
/// final waypoint to the goal.
pub fn path_cost(waypoints: &[Vector3<f64>], goal: &Vector3<f64>) -> f64 {
    assert!(!waypoints.is_empty(), "path cost needs at least one waypoint");
    let segments: f64 = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    segments + (waypoints.last().unwrap() - goal).norm()
}

/// Clipped straight-line steering: `to` if within `step`, else one step from
/// `from` toward `to`.
pub fn steer(from: &Vector3<f64>, to: &Vector3<f64>, step: f64) -> Vector3<f64> {
    assert!(step > 0.0);
    let delta = to - from;
    let dist = delta.norm();
    if dist <= step {
        *to
    } else {
        from + delta * (step / dist)
    }
}

/// Goal for one planning episode under the prediction horizon.
///
/// Returns `goal` when it is within `horizon` of `start`, otherwise the
/// point at `horizon` along the start→goal line, replaced by the nearest
/// free sample when that point is occupied.
pub fn intermediate_goal(
    map: &InstanceMap,
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    horizon: f64,
    d_safe: f64,
    samples: &SampleSet,
) -> Result<Vector3<f64>, PlanError> {
    assert!(horizon > 0.0);
    let delta = goal - start;
    let dist = delta.norm();
    if dist <= horizon {
        return Ok(*goal);
    }
    let truncated = start + delta * (horizon / dist);
    if map.signed_distance(&truncated) >= d_safe {
        return Ok(truncated);
    }
    samples
        .points
        .iter()
        .filter(|p| map.signed_distance(p) >= d_safe)
        .min_by(|a, b| {
            (*a - truncated)
                .norm()
                .total_cmp(&(*b - truncated).norm())
        })
        .copied()
        .ok_or(PlanError::NoFreeIntermediateGoal)
}

/// Index of the candidate to execute: the cheapest whose clearance meets
/// `d_safe`, else the one with maximum clearance. `candidates` must already
/// be sorted by cost ascending.
pub fn select_safe_candidate(candidates: &[PathCandidate], d_safe: f64) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    if let Some(idx) = candidates.iter().position(|c| c.min_clearance >= d_safe) {
        return Some(idx);
    }
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.min_clearance > candidates[best].min_clearance {
            best = i;
        }
    }
    Some(best)
}

/// SplitMix64 mixing for per-instance seeds derived from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `num_parallel` independently seeded RRT* instances on one map
/// snapshot and applies the safe-path selection rule.
///
/// Candidates are collected by instance index, sorted by cost ascending;
/// the full sorted list is returned alongside the selected path.
pub fn plan_and_select(
    map: &InstanceMap,
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    cfg: &PlannerConfig,
) -> Result<(PathCandidate, Vec<PathCandidate>), PlanError> {
    assert!(cfg.num_parallel >= 1);
    let results: Vec<Result<PathCandidate, PlanError>> = (0..cfg.num_parallel)
        .into_par_iter()
        .map(|i| {
            let mut instance_cfg = cfg.clone();
            instance_cfg.seed = derive_seed(cfg.seed, i as u64);
            plan_rrt_star(map, start, goal, &instance_cfg)
        })
        .collect();

    let mut candidates: Vec<PathCandidate> = results.into_iter().flatten().collect();
    if candidates.is_empty() {
        return Err(PlanError::AllPlannersFailed(cfg.num_parallel));
    }
    candidates.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    let idx = select_safe_candidate(&candidates, cfg.d_safe).expect("non-empty candidates");
    Ok((candidates[idx].clone(), candidates))
}
