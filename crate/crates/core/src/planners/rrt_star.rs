//! RRT* over an instance map.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Aabb;
use crate::map::InstanceMap;
use crate::search_space::{build_search_space, generate_interior_points, SampleSet};

use super::{
    intermediate_goal, path_cost, steer, PathCandidate, PlanError, PlannerConfig, SamplerMode,
    EDGE_CLEARANCE,
};

/// Search tree: positions, parent links and cost-to-come per node.
///
/// The root is the start; every node's cost-to-come equals its parent's cost
/// plus the connecting edge length, and rewiring keeps that invariant by
/// propagating the improvement through the affected subtree.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Vector3<f64>>,
    parents: Vec<Option<usize>>,
    costs: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    pub fn new(root: Vector3<f64>) -> Self {
        Self {
            nodes: vec![root],
            parents: vec![None],
            costs: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    /// Number of nodes; never zero, the root is always present.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn position(&self, idx: usize) -> &Vector3<f64> {
        &self.nodes[idx]
    }

    pub fn cost(&self, idx: usize) -> f64 {
        self.costs[idx]
    }

    /// Index of the node closest to `p`; ties break to the lowest index.
    fn nearest(&self, p: &Vector3<f64>) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in self.nodes.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn neighbors_within(&self, p: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, q)| (*q - p).norm_squared() <= r2)
            .map(|(i, _)| i)
            .collect()
    }

    fn add(&mut self, p: Vector3<f64>, parent: usize, cost: f64) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(p);
        self.parents.push(Some(parent));
        self.costs.push(cost);
        self.children.push(Vec::new());
        self.children[parent].push(idx);
        idx
    }

    /// Reparents `node` under `new_parent` with the given (strictly lower)
    /// cost and propagates the improvement through the subtree.
    fn reparent(&mut self, node: usize, new_parent: usize, new_cost: f64) {
        let old_parent = self.parents[node].expect("cannot reparent the root");
        self.children[old_parent].retain(|&c| c != node);
        self.parents[node] = Some(new_parent);
        self.children[new_parent].push(node);
        let delta = new_cost - self.costs[node];
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.costs[n] += delta;
            stack.extend_from_slice(&self.children[n]);
        }
    }

    /// Waypoints from the root to `idx`.
    fn path_to(&self, idx: usize) -> Vec<Vector3<f64>> {
        let mut rev = Vec::new();
        let mut cur = Some(idx);
        while let Some(i) = cur {
            rev.push(self.nodes[i]);
            cur = self.parents[i];
        }
        rev.reverse();
        rev
    }

    /// Largest violation of the cost-to-come invariant, for audits.
    pub fn max_cost_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 1..self.nodes.len() {
            let p = self.parents[i].unwrap();
            let expected = self.costs[p] + (self.nodes[i] - self.nodes[p]).norm();
            worst = worst.max((self.costs[i] - expected).abs());
        }
        worst
    }
}

/// Sample source for one planner instance.
enum Sampler {
    Set { points: Vec<Vector3<f64>>, deck: Vec<usize> },
    Box(Aabb),
}

impl Sampler {
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        match self {
            Sampler::Set { points, deck } => {
                if deck.is_empty() {
                    *deck = (0..points.len()).collect();
                    deck.shuffle(rng);
                }
                points[deck.pop().expect("non-empty deck")]
            }
            Sampler::Box(bounds) => {
                let e = bounds.extent();
                bounds.min
                    + Vector3::new(
                        rng.random::<f64>() * e.x,
                        rng.random::<f64>() * e.y,
                        rng.random::<f64>() * e.z,
                    )
            }
        }
    }
}

/// Cuts the polyline at cumulative length `horizon`, inserting the cut point.
fn truncate_at_length(waypoints: &mut Vec<Vector3<f64>>, horizon: f64) {
    let mut cum = 0.0;
    for i in 1..waypoints.len() {
        let seg = (waypoints[i] - waypoints[i - 1]).norm();
        if cum + seg > horizon {
            let remain = horizon - cum;
            if remain > 1e-12 {
                let dir = (waypoints[i] - waypoints[i - 1]) / seg;
                let cut = waypoints[i - 1] + dir * remain;
                waypoints.truncate(i);
                waypoints.push(cut);
            } else {
                waypoints.truncate(i);
            }
            return;
        }
        cum += seg;
    }
}

pub(super) struct GrownTree {
    pub tree: Tree,
    pub goal_node: usize,
    pub effective_goal: Vector3<f64>,
}

pub(super) fn grow_tree(
    map: &InstanceMap,
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    cfg: &PlannerConfig,
) -> Result<GrownTree, PlanError> {
    if map.signed_distance(start) < cfg.d_safe {
        return Err(PlanError::PathNotFound);
    }

    // Search space between start and goal; its sample set also backs the
    // intermediate-goal relocation.
    let outer = build_search_space(start, goal, &cfg.bounds);
    let outer_samples = generate_interior_points(&outer, cfg.samples_n, &cfg.bounds);
    let effective_goal =
        intermediate_goal(map, start, goal, cfg.horizon, cfg.d_safe, &outer_samples)?;

    let mut sampler = match cfg.sampler_mode {
        SamplerMode::EllipsoidSet => {
            let samples: SampleSet = if (effective_goal - goal).norm() < 1e-12 {
                outer_samples
            } else {
                let inner = build_search_space(start, &effective_goal, &cfg.bounds);
                generate_interior_points(&inner, cfg.samples_n, &cfg.bounds)
            };
            if samples.is_empty() {
                // Degenerate bounds can empty the lattice; fall back to
                // uniform draws so the planner stays usable.
                Sampler::Box(cfg.bounds)
            } else {
                Sampler::Set {
                    points: samples.points,
                    deck: Vec::new(),
                }
            }
        }
        SamplerMode::UniformBox => Sampler::Box(cfg.bounds),
    };

    let mut tree = Tree::new(*start);
    if (start - effective_goal).norm() <= cfg.goal_tolerance {
        return Ok(GrownTree {
            tree,
            goal_node: 0,
            effective_goal,
        });
    }

    // The goal bias belongs to the improved variant's steering; the
    // original baseline draws purely uniformly.
    let goal_bias = match cfg.sampler_mode {
        SamplerMode::EllipsoidSet => cfg.goal_bias,
        SamplerMode::UniformBox => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.max_iterations {
        let target = if rng.random::<f64>() < goal_bias {
            effective_goal
        } else {
            sampler.draw(&mut rng)
        };
        let nearest = tree.nearest(&target);
        let new_point = steer(tree.position(nearest), &target, cfg.step);
        if map.signed_distance(&new_point) < EDGE_CLEARANCE {
            continue;
        }
        if !map.segment_clear(tree.position(nearest), &new_point, cfg.collision_step, EDGE_CLEARANCE)
        {
            continue;
        }

        let neighbors = tree.neighbors_within(&new_point, cfg.rewire_radius);
        let mut parent = nearest;
        let mut cost = tree.cost(nearest) + (tree.position(nearest) - new_point).norm();
        // Candidates sorted by prospective cost; the first collision-free
        // one is the optimal parent, so later candidates need no check.
        let mut candidates: Vec<(f64, usize)> = neighbors
            .iter()
            .filter(|&&nb| nb != nearest)
            .map(|&nb| (tree.cost(nb) + (tree.position(nb) - new_point).norm(), nb))
            .filter(|&(through, _)| through < cost - 1e-12)
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (through, nb) in candidates {
            if through >= cost - 1e-12 {
                break;
            }
            if map.segment_clear(tree.position(nb), &new_point, cfg.collision_step, EDGE_CLEARANCE) {
                parent = nb;
                cost = through;
                break;
            }
        }
        let idx = tree.add(new_point, parent, cost);

        for &nb in &neighbors {
            if nb == parent {
                continue;
            }
            let through = cost + (new_point - tree.position(nb)).norm();
            if through < tree.cost(nb) - 1e-12
                && map.segment_clear(&new_point, tree.position(nb), cfg.collision_step, EDGE_CLEARANCE)
            {
                tree.reparent(nb, idx, through);
            }
        }

        // Terminate on touching the goal region, or on a clear direct hop
        // from inside the rewire neighborhood of the goal.
        let goal_dist = (new_point - effective_goal).norm();
        let connected = goal_dist <= cfg.goal_tolerance
            || (goal_dist <= cfg.rewire_radius
                && map.segment_clear(&new_point, &effective_goal, cfg.collision_step, EDGE_CLEARANCE));
        if connected {
            return Ok(GrownTree {
                tree,
                goal_node: idx,
                effective_goal,
            });
        }
    }
    Err(PlanError::PathNotFound)
}

/// Single-instance RRT*.
///
/// Deterministic for a fixed seed: samples come either from the ellipsoid
/// interior set or uniformly from the bounds, the tree terminates at the
/// first node within the goal tolerance of the (possibly horizon-relocated)
/// goal, and the resulting path is truncated at the horizon length. The
/// candidate cost keeps the mission goal as its terminal term so truncated
/// candidates remain comparable.
pub fn plan_rrt_star(
    map: &InstanceMap,
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    cfg: &PlannerConfig,
) -> Result<PathCandidate, PlanError> {
    let grown = grow_tree(map, start, goal, cfg)?;
    let mut waypoints = grown.tree.path_to(grown.goal_node);

    // Land exactly on the episode goal when the final hop is clear.
    let last = *waypoints.last().expect("path has at least the root");
    if (last - grown.effective_goal).norm() > 1e-12
        && map.segment_clear(&last, &grown.effective_goal, cfg.collision_step, EDGE_CLEARANCE)
    {
        waypoints.push(grown.effective_goal);
    }
    truncate_at_length(&mut waypoints, cfg.horizon);

    let cost = path_cost(&waypoints, goal);
    let min_clearance = map.polyline_clearance(&waypoints, cfg.collision_step);
    Ok(PathCandidate {
        waypoints,
        cost,
        min_clearance,
    })
}
