//! Benchmark harness.
//!
//! Reproduces the planner comparison protocol: per seeded world, the same
//! start/goal pair is planned by grid A*, the original (uniform-sampling)
//! RRT* and the improved (ellipsoid-set) RRT*, timing only the planning
//! call. The harness also times the instance-map build per scan and the
//! per-phase cost of the full pipeline (map build, search-space generation,
//! multi-instance RRT*, iLQR smoothing, B-spline fit) as percentages.
//!
//! Rows are gathered and sorted by (world id, planner), so the result
//! content is deterministic for a fixed master seed; wall-clock columns are
//! measurements and vary run to run.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use kinoplan::dynamics::State;
use kinoplan::map::{random_world, InstanceMap, WorldSpec};
use kinoplan::planners::{
    derive_seed, plan_a_star, plan_and_select, plan_rrt_star, SamplerMode,
};
use kinoplan::search_space::{build_search_space, generate_interior_points};
use kinoplan::smoothing::{chained_positions, smooth_path};
use kinoplan::trajectory::fit_bspline;

use crate::scenario::{ScenarioError, ScenarioSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    AStar,
    RrtOriginal,
    RrtImproved,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [
        PlannerKind::AStar,
        PlannerKind::RrtOriginal,
        PlannerKind::RrtImproved,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::AStar => "a_star",
            PlannerKind::RrtOriginal => "rrt_original",
            PlannerKind::RrtImproved => "rrt_improved",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "a_star" => Some(PlannerKind::AStar),
            "rrt_original" => Some(PlannerKind::RrtOriginal),
            "rrt_improved" => Some(PlannerKind::RrtImproved),
            _ => None,
        }
    }
}

/// One (world, planner) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub world_id: u32,
    pub planner: PlannerKind,
    pub success: bool,
    pub planning_time_s: f64,
    pub cost: Option<f64>,
    pub path_length: Option<f64>,
    pub min_clearance: Option<f64>,
}

/// Pipeline phases of the operation-time breakdown.
pub const PHASES: [&str; 5] = ["map_build", "search_space", "rrt_star", "ilqr", "bspline"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PhaseBreakdown {
    /// Mean seconds per phase, `PHASES` order.
    pub mean_s: [f64; 5],
    /// Number of worlds the full pipeline succeeded on.
    pub samples: u32,
}

impl PhaseBreakdown {
    /// Percentages of the pipeline total; sums to 100 when any sample exists.
    pub fn percentages(&self) -> [f64; 5] {
        let total: f64 = self.mean_s.iter().sum();
        if total <= 0.0 {
            return [0.0; 5];
        }
        let mut out = [0.0; 5];
        for (o, m) in out.iter_mut().zip(self.mean_s.iter()) {
            *o = 100.0 * m / total;
        }
        out
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_s: f64,
    pub median_s: f64,
    pub max_s: f64,
}

impl TimingStats {
    fn from_samples(samples: &mut [f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        samples.sort_by(f64::total_cmp);
        Self {
            mean_s: samples.iter().sum::<f64>() / samples.len() as f64,
            median_s: samples[samples.len() / 2],
            max_s: *samples.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_worlds: u32,
    pub rows: Vec<BenchRow>,
    /// Instance-map build time per scan.
    pub map_build: TimingStats,
    pub phases: PhaseBreakdown,
}

impl BenchReport {
    pub fn mean_time(&self, kind: PlannerKind) -> f64 {
        let times: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.planner == kind)
            .map(|r| r.planning_time_s)
            .collect();
        if times.is_empty() {
            return f64::NAN;
        }
        times.iter().sum::<f64>() / times.len() as f64
    }

    pub fn median_time(&self, kind: PlannerKind) -> f64 {
        let mut times: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.planner == kind)
            .map(|r| r.planning_time_s)
            .collect();
        if times.is_empty() {
            return f64::NAN;
        }
        times.sort_by(f64::total_cmp);
        times[times.len() / 2]
    }

    pub fn success_rate(&self, kind: PlannerKind) -> f64 {
        let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.planner == kind).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("world,planner,success,time_s,cost,path_length,min_clearance\n");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.world_id,
                r.planner.name(),
                r.success,
                r.planning_time_s,
                opt(r.cost),
                opt(r.path_length),
                opt(r.min_clearance),
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "worlds: {}", self.n_worlds);
        let _ = writeln!(
            out,
            "{:<14} {:>9} {:>12} {:>14} {:>12}",
            "planner", "success", "mean_time_s", "median_time_s", "mean_cost"
        );
        for kind in PlannerKind::ALL {
            let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.planner == kind).collect();
            if rows.is_empty() {
                continue;
            }
            let successes = rows.iter().filter(|r| r.success).count();
            let mean_cost = {
                let costs: Vec<f64> = rows.iter().filter_map(|r| r.cost).collect();
                if costs.is_empty() {
                    f64::NAN
                } else {
                    costs.iter().sum::<f64>() / costs.len() as f64
                }
            };
            let _ = writeln!(
                out,
                "{:<14} {:>4}/{:<4} {:>12.6} {:>14.6} {:>12.3}",
                kind.name(),
                successes,
                rows.len(),
                self.mean_time(kind),
                self.median_time(kind),
                mean_cost
            );
        }
        let _ = writeln!(
            out,
            "map build per scan: mean {:.6} s, median {:.6} s, max {:.6} s",
            self.map_build.mean_s, self.map_build.median_s, self.map_build.max_s
        );
        if self.phases.samples > 0 {
            let pct = self.phases.percentages();
            let _ = writeln!(out, "pipeline breakdown over {} worlds (%):", self.phases.samples);
            for (name, p) in PHASES.iter().zip(pct.iter()) {
                let _ = writeln!(out, "  {name:<13} {p:6.2}");
            }
        }
        out
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("bench.csv"), self.to_csv())?;
        std::fs::write(out_dir.join("summary.txt"), self.summary())?;
        Ok(())
    }
}

/// Drops the wall-clock column, leaving the deterministic result content.
pub fn csv_strip_times(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            let mut kept: Vec<&str> = Vec::with_capacity(6);
            for (i, f) in fields.iter().enumerate() {
                if i != 3 {
                    kept.push(f);
                }
            }
            kept.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn candidate_fields(
    result: Result<kinoplan::planners::PathCandidate, kinoplan::planners::PlanError>,
    elapsed: f64,
    world_id: u32,
    kind: PlannerKind,
) -> BenchRow {
    match result {
        Ok(path) => BenchRow {
            world_id,
            planner: kind,
            success: true,
            planning_time_s: elapsed,
            cost: Some(path.cost),
            path_length: Some(path.length()),
            min_clearance: Some(path.min_clearance),
        },
        Err(_) => BenchRow {
            world_id,
            planner: kind,
            success: false,
            planning_time_s: elapsed,
            cost: None,
            path_length: None,
            min_clearance: None,
        },
    }
}

/// Runs the planner-comparison sweep over `n_worlds` seeded worlds.
///
/// Every world runs all planners (or the filtered one) on the identical
/// start/goal pair; failures are recorded per row and never abort the sweep.
pub fn run_benchmark(
    n_worlds: u32,
    spec: &ScenarioSpec,
    filter: Option<PlannerKind>,
) -> Result<BenchReport, ScenarioError> {
    assert!(n_worlds >= 1);
    if spec.world.file.is_some() && n_worlds > 1 {
        return Err(ScenarioError::Validation {
            key: "world.file".into(),
            reason: "benchmark sweeps need generated worlds (file worlds fix one map)".into(),
        });
    }

    let start = spec.start_vec();
    let goal = spec.goal_vec();
    let base_world = spec.world_spec();
    let smoother = spec.smoother.to_config();
    let params = spec.vehicle.to_params();

    let mut rows = Vec::new();
    let mut map_times = Vec::new();
    let mut phase_sums = [0.0f64; 5];
    let mut phase_samples = 0u32;

    for world_id in 0..n_worlds {
        let world_spec = WorldSpec {
            seed: derive_seed(spec.seed, world_id as u64),
            ..base_world
        };
        let cloud = random_world(&world_spec);
        let bounds = spec.bounds(&cloud);
        let center = bounds.center();
        let covering = bounds.extent().norm() * 0.5 + base_world.obstacle_radius + 1.0;

        let t = Instant::now();
        let map = InstanceMap::build_bounded(&cloud, center, covering, spec.mission.inflation, bounds);
        let map_build_s = t.elapsed().as_secs_f64();
        map_times.push(map_build_s);

        let mut cfg = spec.planner.clone();
        cfg.bounds = bounds;

        let run_kind = |kind: PlannerKind| -> BenchRow {
            match kind {
                PlannerKind::AStar => {
                    let t = Instant::now();
                    let result = plan_a_star(&map, &start, &goal, &cfg);
                    candidate_fields(result, t.elapsed().as_secs_f64(), world_id, kind)
                }
                PlannerKind::RrtOriginal => {
                    let mut c = cfg.clone();
                    c.sampler_mode = SamplerMode::UniformBox;
                    c.seed = derive_seed(world_spec.seed, 1);
                    let t = Instant::now();
                    let result = plan_rrt_star(&map, &start, &goal, &c);
                    candidate_fields(result, t.elapsed().as_secs_f64(), world_id, kind)
                }
                PlannerKind::RrtImproved => {
                    let mut c = cfg.clone();
                    c.sampler_mode = SamplerMode::EllipsoidSet;
                    c.seed = derive_seed(world_spec.seed, 1);
                    let t = Instant::now();
                    let result = plan_rrt_star(&map, &start, &goal, &c);
                    candidate_fields(result, t.elapsed().as_secs_f64(), world_id, kind)
                }
            }
        };

        for kind in PlannerKind::ALL {
            if filter.is_none() || filter == Some(kind) {
                rows.push(run_kind(kind));
            }
        }

        // Full-pipeline phase timing (improved planner path).
        if filter.is_none() {
            let t = Instant::now();
            let ellipsoid = build_search_space(&start, &goal, &bounds);
            let samples = generate_interior_points(&ellipsoid, cfg.samples_n, &bounds);
            let search_space_s = t.elapsed().as_secs_f64();
            std::hint::black_box(&samples);

            let mut c = cfg.clone();
            c.seed = derive_seed(world_spec.seed, 2);
            let t = Instant::now();
            let planned = plan_and_select(&map, &start, &goal, &c);
            let rrt_s = t.elapsed().as_secs_f64();

            if let Ok((selected, _)) = planned {
                let x0 = State::at_rest(start);
                let t = Instant::now();
                let smoothed = smooth_path(&selected, &x0, &map, &smoother, &params);
                let ilqr_s = t.elapsed().as_secs_f64();
                if let Ok(segments) = smoothed {
                    let t = Instant::now();
                    let spline = fit_bspline(&chained_positions(&segments), spec.mission.speed);
                    let bspline_s = t.elapsed().as_secs_f64();
                    std::hint::black_box(&spline);

                    phase_sums[0] += map_build_s;
                    phase_sums[1] += search_space_s;
                    phase_sums[2] += rrt_s;
                    phase_sums[3] += ilqr_s;
                    phase_sums[4] += bspline_s;
                    phase_samples += 1;
                }
            }
        }
    }

    rows.sort_by(|a, b| {
        (a.world_id, a.planner.name()).cmp(&(b.world_id, b.planner.name()))
    });

    let phases = PhaseBreakdown {
        mean_s: if phase_samples > 0 {
            let mut m = phase_sums;
            for v in &mut m {
                *v /= phase_samples as f64;
            }
            m
        } else {
            [0.0; 5]
        },
        samples: phase_samples,
    };

    Ok(BenchReport {
        n_worlds,
        rows,
        map_build: TimingStats::from_samples(&mut map_times),
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    fn bench_scenario() -> ScenarioSpec {
        parse_scenario_str(
            "seed = 5\nstart = [1.0, 1.0, 1.0]\ngoal = [19.0, 19.0, 19.0]\n",
        )
        .unwrap()
    }

    #[test]
    fn row_count_and_header() {
        let report = run_benchmark(2, &bench_scenario(), None).unwrap();
        assert_eq!(report.rows.len(), 6);
        let csv = report.to_csv();
        assert!(csv.starts_with("world,planner,success,time_s,cost,path_length,min_clearance\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn stripped_csv_is_deterministic() {
        let spec = bench_scenario();
        let a = run_benchmark(3, &spec, None).unwrap();
        let b = run_benchmark(3, &spec, None).unwrap();
        assert_eq!(csv_strip_times(&a.to_csv()), csv_strip_times(&b.to_csv()));
        // Full CSVs differ only in the stripped column count.
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(b.rows.iter()) {
            assert_eq!(ra.cost, rb.cost);
            assert_eq!(ra.path_length, rb.path_length);
            assert_eq!(ra.min_clearance, rb.min_clearance);
        }
    }

    #[test]
    fn filter_limits_planners() {
        let report = run_benchmark(2, &bench_scenario(), Some(PlannerKind::AStar)).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.planner == PlannerKind::AStar));
        assert_eq!(report.phases.samples, 0);
    }

    #[test]
    fn phase_percentages_sum_to_hundred() {
        let report = run_benchmark(2, &bench_scenario(), None).unwrap();
        assert!(report.phases.samples > 0);
        let sum: f64 = report.phases.percentages().iter().sum();
        assert!((sum - 100.0).abs() < 0.5, "percentages sum {sum}");
    }
}
