//! Grid A* baseline.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Vector3;

use crate::map::InstanceMap;

use super::{path_cost, PathCandidate, PlanError, PlannerConfig};

struct Grid {
    min: Vector3<f64>,
    res: f64,
    nx: usize,
    ny: usize,
    nz: usize,
}

impl Grid {
    fn new(cfg: &PlannerConfig) -> Self {
        let extent = cfg.bounds.extent();
        let res = cfg.grid_res;
        Self {
            min: cfg.bounds.min,
            res,
            nx: ((extent.x / res).ceil() as usize).max(1),
            ny: ((extent.y / res).ceil() as usize).max(1),
            nz: ((extent.z / res).ceil() as usize).max(1),
        }
    }

    fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    fn cell_of(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut cell = [0usize; 3];
        let dims = [self.nx, self.ny, self.nz];
        for axis in 0..3 {
            let f = (p[axis] - self.min[axis]) / self.res;
            if f < 0.0 || f > dims[axis] as f64 {
                return None;
            }
            cell[axis] = (f.floor() as usize).min(dims[axis] - 1);
        }
        Some(cell)
    }

    fn center(&self, c: [usize; 3]) -> Vector3<f64> {
        Vector3::new(
            self.min.x + (c[0] as f64 + 0.5) * self.res,
            self.min.y + (c[1] as f64 + 0.5) * self.res,
            self.min.z + (c[2] as f64 + 0.5) * self.res,
        )
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[2] * self.ny + c[1]) * self.nx + c[0]
    }

    fn cell_from_index(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        [i, j, k]
    }
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so the lowest f pops first, with
        // deterministic tie-breaking on g then cell index.
        other
            .f
            .total_cmp(&self.f)
            .then(other.g.total_cmp(&self.g))
            .then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 26-connected grid A* with a Euclidean heuristic over cells whose centers
/// have clearance at least `d_safe`. Returns cell-center waypoints.
pub fn plan_a_star(
    map: &InstanceMap,
    start: &Vector3<f64>,
    goal: &Vector3<f64>,
    cfg: &PlannerConfig,
) -> Result<PathCandidate, PlanError> {
    assert!(cfg.grid_res > 0.0);
    if (start - goal).norm() == 0.0 {
        return Ok(PathCandidate {
            waypoints: vec![*start],
            cost: 0.0,
            min_clearance: map.signed_distance(start),
        });
    }

    let grid = Grid::new(cfg);
    let start_cell = grid.cell_of(start).ok_or(PlanError::PathNotFound)?;
    let goal_cell = grid.cell_of(goal).ok_or(PlanError::PathNotFound)?;
    let goal_center = grid.center(goal_cell);

    // Lazy clearance cache: 0 unknown, 1 free, 2 blocked.
    let mut occupancy = vec![0u8; grid.len()];
    let free = |cell: [usize; 3], occupancy: &mut Vec<u8>| -> bool {
        let idx = grid.index(cell);
        if occupancy[idx] == 0 {
            let clear = map.signed_distance(&grid.center(cell)) >= cfg.d_safe;
            occupancy[idx] = if clear { 1 } else { 2 };
        }
        occupancy[idx] == 1
    };

    if !free(start_cell, &mut occupancy) || !free(goal_cell, &mut occupancy) {
        return Err(PlanError::PathNotFound);
    }

    let mut offsets = Vec::with_capacity(26);
    for dk in -1i64..=1 {
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 && dk == 0 {
                    continue;
                }
                let step = cfg.grid_res * ((di * di + dj * dj + dk * dk) as f64).sqrt();
                offsets.push((di, dj, dk, step));
            }
        }
    }

    let start_idx = grid.index(start_cell);
    let goal_idx = grid.index(goal_cell);
    let mut g_score = vec![f64::INFINITY; grid.len()];
    let mut parent = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut open = BinaryHeap::new();
    g_score[start_idx] = 0.0;
    open.push(OpenEntry {
        f: (grid.center(start_cell) - goal_center).norm(),
        g: 0.0,
        idx: start_idx,
    });

    while let Some(entry) = open.pop() {
        if closed[entry.idx] || entry.g > g_score[entry.idx] {
            continue;
        }
        closed[entry.idx] = true;
        if entry.idx == goal_idx {
            let mut rev = Vec::new();
            let mut cur = goal_idx;
            loop {
                rev.push(grid.center(grid.cell_from_index(cur)));
                if cur == start_idx {
                    break;
                }
                cur = parent[cur];
            }
            rev.reverse();
            let cost = path_cost(&rev, goal);
            let min_clearance = map.polyline_clearance(&rev, cfg.collision_step);
            return Ok(PathCandidate {
                waypoints: rev,
                cost,
                min_clearance,
            });
        }

        let cell = grid.cell_from_index(entry.idx);
        for &(di, dj, dk, step) in &offsets {
            let ni = cell[0] as i64 + di;
            let nj = cell[1] as i64 + dj;
            let nk = cell[2] as i64 + dk;
            if ni < 0
                || nj < 0
                || nk < 0
                || ni >= grid.nx as i64
                || nj >= grid.ny as i64
                || nk >= grid.nz as i64
            {
                continue;
            }
            let ncell = [ni as usize, nj as usize, nk as usize];
            let nidx = grid.index(ncell);
            if closed[nidx] || !free(ncell, &mut occupancy) {
                continue;
            }
            let tentative = entry.g + step;
            if tentative < g_score[nidx] {
                g_score[nidx] = tentative;
                parent[nidx] = entry.idx;
                open.push(OpenEntry {
                    f: tentative + (grid.center(ncell) - goal_center).norm(),
                    g: tentative,
                    idx: nidx,
                });
            }
        }
    }
    Err(PlanError::PathNotFound)
}
