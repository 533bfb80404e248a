//! `kinoplan` command line: benchmark sweeps, closed-loop missions,
//! standalone path smoothing and search-space dumps.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 scenario parse error,
//! 3 scenario validation error, 4 goal occupied, 5 mission timeout,
//! 6 planning failed, 7 scripted sensor fault.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;

use kinoplan::dynamics::State;
use kinoplan::io::{format_points, read_points, write_points};
use kinoplan::map::InstanceMap;
use kinoplan::mission::{run_mission, MissionError, MissionLog};
use kinoplan::planners::path_cost;
use kinoplan::search_space::{build_search_space, generate_interior_points};
use kinoplan::smoothing::{smooth_path, TrajectorySegment};
use kinoplan::trajectory::fit_bspline;

use kinoplan_cli::bench::{run_benchmark, PlannerKind};
use kinoplan_cli::scenario::{parse_scenario, ScenarioError, ScenarioSpec};

#[derive(Parser)]
#[command(name = "kinoplan", version, about = "Kinodynamic replanning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the planner-comparison sweep over seeded random worlds.
    Bench {
        #[arg(long)]
        scenario: PathBuf,
        /// Number of seeded worlds.
        #[arg(long, default_value_t = 100)]
        worlds: u32,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for bench.csv and summary.txt.
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one planner: a_star | rrt_original | rrt_improved.
        #[arg(long)]
        planner: Option<String>,
    },
    /// Run the closed-loop replanning mission.
    Mission {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the mission log and path dumps.
        #[arg(long)]
        out: PathBuf,
    },
    /// Smooth a waypoint file into a dynamically feasible trajectory.
    Smooth {
        #[arg(long)]
        scenario: PathBuf,
        /// Waypoint file: one `x y z` per line.
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the deterministic search-space sample set for start→goal.
    SampleSpace {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn scenario_exit_code(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Io { .. } | ScenarioError::Parse(_) => 2,
        ScenarioError::Validation { .. } => 3,
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec, u8> {
    match parse_scenario(path) {
        Ok(mut spec) => {
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            Ok(spec)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(scenario_exit_code(&e))
        }
    }
}

fn write_mission_artifacts(out: &Path, log: &MissionLog) -> std::io::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(
        out.join("mission_log.json"),
        serde_json::to_string_pretty(log).expect("log serializes"),
    )?;

    let rows: Vec<(f64, Vector3<f64>, Vector3<f64>)> = log
        .executed
        .iter()
        .map(|s| (s.time, Vector3::from(s.position), Vector3::from(s.velocity)))
        .collect();
    std::fs::write(
        out.join("executed.txt"),
        kinoplan::io::format_trajectory_rows(&rows),
    )?;

    let mut planned = String::new();
    for (i, ep) in log.episodes.iter().enumerate() {
        planned.push_str(&format!(
            "# episode {i} tick {} snapshot {} length {}\n",
            ep.tick, ep.snapshot_id, ep.planned_length
        ));
        planned.push_str(&format_points(
            &ep.planned_waypoints
                .iter()
                .map(|w| Vector3::from(*w))
                .collect::<Vec<_>>(),
        ));
    }
    std::fs::write(out.join("planned.txt"), planned)?;
    Ok(())
}

fn cmd_bench(
    scenario: &Path,
    worlds: u32,
    seed: Option<u64>,
    out: &Path,
    planner: Option<String>,
) -> u8 {
    let spec = match load_scenario(scenario, seed) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let filter = match planner.as_deref() {
        None => None,
        Some(name) => match PlannerKind::from_name(name) {
            Some(kind) => Some(kind),
            None => {
                eprintln!("error: unknown planner {name:?} (expected a_star, rrt_original or rrt_improved)");
                return 3;
            }
        },
    };
    if worlds == 0 {
        eprintln!("error: --worlds must be at least 1");
        return 3;
    }
    let report = match run_benchmark(worlds, &spec, filter) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return scenario_exit_code(&e);
        }
    };
    if let Err(e) = report.write(out) {
        eprintln!("error: cannot write outputs: {e}");
        return 1;
    }
    print!("{}", report.summary());
    0
}

fn cmd_mission(scenario: &Path, seed: Option<u64>, out: &Path) -> u8 {
    let spec = match load_scenario(scenario, seed) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let base_dir = scenario.parent().unwrap_or(Path::new("."));
    let world = match spec.load_world(base_dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return scenario_exit_code(&e);
        }
    };
    let planner = spec.planner_for(&world);
    let smoother = spec.smoother.to_config();
    let params = spec.vehicle.to_params();
    let start = State::at_rest(spec.start_vec());
    let goal = spec.goal_vec();

    let result = run_mission(&world, &start, &goal, &planner, &smoother, &params, &spec.mission);
    let (log, code, reason): (&MissionLog, u8, Option<&str>) = match &result {
        Ok(log) => (log, 0, None),
        Err(MissionError::GoalOccupied { log }) => (log, 4, Some("goal occupied")),
        Err(MissionError::Timeout { log }) => (log, 5, Some("mission timeout")),
        Err(MissionError::PlanningFailed { log }) => (log, 6, Some("planning failed")),
        Err(MissionError::SensorFault { log }) => (log, 7, Some("sensor fault")),
    };
    if let Err(e) = write_mission_artifacts(out, log) {
        eprintln!("error: cannot write outputs: {e}");
        return 1;
    }
    match reason {
        None => {
            println!(
                "goal reached in {} ticks, {} planning episodes, {} replans",
                log.ticks,
                log.episodes.len(),
                log.replans
            );
            0
        }
        Some(msg) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn segments_to_rows(
    segments: &[TrajectorySegment],
    dt: f64,
) -> Vec<(f64, Vector3<f64>, Vector3<f64>)> {
    let mut rows = Vec::new();
    let mut k = 0u64;
    for (i, seg) in segments.iter().enumerate() {
        let skip = usize::from(i > 0);
        for s in seg.states.iter().skip(skip) {
            rows.push((k as f64 * dt, s.position, s.velocity));
            k += 1;
        }
    }
    rows
}

fn cmd_smooth(scenario: &Path, path: &Path, out: &Path) -> u8 {
    let spec = match load_scenario(scenario, None) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let waypoints = match read_points(path) {
        Ok(w) if !w.is_empty() => w,
        Ok(_) => {
            eprintln!("error: waypoint file {} is empty", path.display());
            return 2;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let base_dir = scenario.parent().unwrap_or(Path::new("."));
    let world = match spec.load_world(base_dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return scenario_exit_code(&e);
        }
    };
    let bounds = spec.bounds(&world);
    let covering = bounds.extent().norm() * 0.5 + 1.0;
    let map = InstanceMap::build_bounded(
        &world,
        bounds.center(),
        covering,
        spec.mission.inflation,
        bounds,
    );
    let smoother = spec.smoother.to_config();
    let params = spec.vehicle.to_params();

    let goal = *waypoints.last().unwrap();
    let candidate = kinoplan::planners::PathCandidate {
        cost: path_cost(&waypoints, &goal),
        min_clearance: map.polyline_clearance(&waypoints, spec.planner.collision_step),
        waypoints,
    };
    let x0 = State::at_rest(candidate.waypoints[0]);
    match smooth_path(&candidate, &x0, &map, &smoother, &params) {
        Ok(segments) => {
            if let Err(e) = std::fs::create_dir_all(out).and_then(|_| {
                std::fs::write(
                    out.join("smoothed.txt"),
                    kinoplan::io::format_trajectory_rows(&segments_to_rows(&segments, smoother.dt)),
                )
            }) {
                eprintln!("error: cannot write outputs: {e}");
                return 1;
            }
            let positions = kinoplan::smoothing::chained_positions(&segments);
            let spline = fit_bspline(&positions, spec.mission.speed);
            println!(
                "smoothed {} segments, {} states, duration {:.2} s",
                segments.len(),
                positions.len(),
                spline.duration()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            6
        }
    }
}

fn cmd_sample_space(scenario: &Path, out: &Path) -> u8 {
    let spec = match load_scenario(scenario, None) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let base_dir = scenario.parent().unwrap_or(Path::new("."));
    let world = match spec.load_world(base_dir) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return scenario_exit_code(&e);
        }
    };
    let bounds = spec.bounds(&world);
    let ellipsoid = build_search_space(&spec.start_vec(), &spec.goal_vec(), &bounds);
    let samples = generate_interior_points(&ellipsoid, spec.planner.samples_n, &bounds);
    let write = std::fs::create_dir_all(out)
        .map_err(kinoplan::io::IoError::from)
        .and_then(|_| write_points(out.join("samples.txt"), &samples.points));
    if let Err(e) = write {
        eprintln!("error: cannot write outputs: {e}");
        return 1;
    }
    println!(
        "search space: center {:?}, radii {:?}, {} samples",
        ellipsoid.center.as_slice(),
        ellipsoid.radii.as_slice(),
        samples.len()
    );
    0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Bench {
            scenario,
            worlds,
            seed,
            out,
            planner,
        } => cmd_bench(&scenario, worlds, seed, &out, planner),
        Command::Mission { scenario, seed, out } => cmd_mission(&scenario, seed, &out),
        Command::Smooth { scenario, path, out } => cmd_smooth(&scenario, &path, &out),
        Command::SampleSpace { scenario, out } => cmd_sample_space(&scenario, &out),
    };
    ExitCode::from(code)
}
