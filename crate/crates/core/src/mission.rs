//! Replanning mission loop.
//!
//! The vehicle idles in `Wait` until a valid goal exists, plans in `Gen`
//! (multi-instance RRT* → iLQR smoothing → B-spline), and tracks the
//! trajectory in `Exec` under a PD regulator, replanning whenever the
//! look-ahead window of the remaining trajectory violates the safety
//! clearance on a fresh map snapshot. Horizon-truncated trajectories end
//! before the mission goal; arrival at a trajectory end re-enters `Wait`
//! and the still-pending goal starts the next planning episode.
//!
//! The simulated plant is a first-order velocity-command model: the PD
//! regulator emits velocity and yaw commands, standing in for an autopilot
//! velocity loop; the full rotor dynamics are exercised by the smoother.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{State, VehicleParams};
use crate::map::{random_world, InstanceMap, MapBuffer, PointCloud, WorldSpec};
use crate::planners::{derive_seed, plan_and_select, PlannerConfig};
use crate::smoothing::{chained_positions, smooth_path, SmootherConfig};
use crate::trajectory::{fit_bspline, sample, BSpline};

/// Mission state machine states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissionState {
    Wait,
    Gen,
    Exec,
}

/// Mission state machine events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissionEvent {
    HaveGoal,
    NoGoal,
    PlanSuccess,
    PlanNotSuccess,
    PlanCannotBeFound,
    InProgress,
    CollisionDetected,
    SuddenChange,
    GoalReached,
}

/// Total transition function of the mission state machine.
///
/// Unmatched pairs leave the state unchanged.
pub fn transition(state: MissionState, event: MissionEvent) -> MissionState {
    use MissionEvent::*;
    use MissionState::*;
    match (state, event) {
        (Wait, HaveGoal) => Gen,
        (Wait, NoGoal) => Wait,
        (Gen, PlanSuccess) => Exec,
        (Gen, PlanNotSuccess) => Gen,
        (Gen, PlanCannotBeFound) => Wait,
        (Exec, InProgress) => Exec,
        (Exec, CollisionDetected) => Gen,
        (Exec, SuddenChange) => Wait,
        (Exec, GoalReached) => Wait,
        (s, _) => s,
    }
}

/// Vehicle odometry sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Odometry {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub yaw: f64,
    pub timestamp: f64,
}

/// PD regulator gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
    pub kp_yaw: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: [1.2, 1.2, 1.2],
            kd: [0.3, 0.3, 0.3],
            kp_yaw: 0.8,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Velocity and yaw commands from actual and desired odometry.
pub fn pd_command(actual: &Odometry, desired: &Odometry, gains: &PdGains) -> (Vector3<f64>, f64) {
    let kp = Vector3::from(gains.kp);
    let kd = Vector3::from(gains.kd);
    let v_cmd = desired.velocity
        + kp.component_mul(&(desired.position - actual.position))
        + kd.component_mul(&(desired.velocity - actual.velocity));
    let yaw_cmd = desired.yaw + gains.kp_yaw * wrap_angle(desired.yaw - actual.yaw);
    (v_cmd, yaw_cmd)
}

/// Closed-loop simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    /// Simulation tick, s.
    pub tick_dt: f64,
    pub gains: PdGains,
    /// First-order plant time constant, s.
    pub plant_tau: f64,
    /// Collision look-ahead window over the remaining trajectory, s.
    pub lookahead: f64,
    /// Instance-map radius around the vehicle, m.
    pub map_radius: f64,
    /// Obstacle inflation, m.
    pub inflation: f64,
    pub max_ticks: u64,
    /// Planning attempts per episode before giving up.
    pub max_plan_attempts: u32,
    /// Trajectory speed for the B-spline time law, m/s.
    pub speed: f64,
    /// Scripted sensor-fault injection tick (SuddenChange), if any.
    pub fault_at_tick: Option<u64>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            tick_dt: 0.05,
            gains: PdGains::default(),
            plant_tau: 0.2,
            lookahead: 2.0,
            map_radius: 4.0,
            inflation: 0.3,
            max_ticks: 12_000,
            max_plan_attempts: 3,
            speed: 1.5,
            fault_at_tick: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: u64,
    pub event: MissionEvent,
    pub state_after: MissionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub tick: u64,
    /// Map snapshot used for planning and smoothing in this episode.
    pub snapshot_id: u64,
    /// Planning attempts consumed, including the successful one.
    pub attempts: u32,
    pub planned_waypoints: Vec<[f64; 3]>,
    /// Waypoint polyline length, m.
    pub planned_length: f64,
    pub selected_cost: f64,
    pub selected_clearance: f64,
    /// True when this episode was triggered by a collision detection.
    pub after_collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedSample {
    pub tick: u64,
    pub time: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissionOutcome {
    GoalReached,
    Timeout,
    GoalOccupied,
    PlanningFailed,
    SensorFault,
}

/// Full record of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub outcome: MissionOutcome,
    pub initial_state: MissionState,
    pub events: Vec<EventRecord>,
    pub episodes: Vec<EpisodeRecord>,
    pub executed: Vec<ExecutedSample>,
    /// Collision-triggered replans.
    pub replans: u32,
    /// Minimum clearance of the executed path against the full world.
    pub min_clearance: f64,
    pub ticks: u64,
    pub goal: [f64; 3],
}

impl MissionLog {
    /// State sequence with consecutive duplicates collapsed.
    pub fn state_trace(&self) -> Vec<MissionState> {
        let mut trace = vec![self.initial_state];
        for ev in &self.events {
            if *trace.last().unwrap() != ev.state_after {
                trace.push(ev.state_after);
            }
        }
        trace
    }

    /// Replays every logged event through `transition` and checks the
    /// recorded successor states.
    pub fn replay_is_consistent(&self) -> bool {
        let mut state = self.initial_state;
        for ev in &self.events {
            state = transition(state, ev.event);
            if state != ev.state_after {
                return false;
            }
        }
        true
    }

    /// Number of Gen episodes (planning successes).
    pub fn gen_episodes(&self) -> usize {
        self.episodes.len()
    }
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error("mission timed out after {} ticks", log.ticks)]
    Timeout { log: Box<MissionLog> },
    #[error("goal pose is occupied or outside the map")]
    GoalOccupied { log: Box<MissionLog> },
    #[error("planning failed after {} episodes", log.episodes.len())]
    PlanningFailed { log: Box<MissionLog> },
    #[error("sensor fault interrupted execution")]
    SensorFault { log: Box<MissionLog> },
}

impl MissionError {
    pub fn log(&self) -> &MissionLog {
        match self {
            MissionError::Timeout { log }
            | MissionError::GoalOccupied { log }
            | MissionError::PlanningFailed { log }
            | MissionError::SensorFault { log } => log,
        }
    }
}

struct ActiveTrajectory {
    spline: BSpline,
    t: f64,
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Runs the closed-loop mission simulation.
///
/// The instance map is rebuilt around the vehicle every tick and published
/// through a double buffer; each planning attempt reads exactly one
/// snapshot. Deterministic for fixed inputs: planner seeds derive from the
/// planner config seed and the attempt counter.
pub fn run_mission(
    world: &PointCloud,
    start: &State,
    goal: &Vector3<f64>,
    planner_cfg: &PlannerConfig,
    smoother_cfg: &SmootherConfig,
    params: &VehicleParams,
    mission_cfg: &MissionConfig,
) -> Result<MissionLog, MissionError> {
    let bounds = planner_cfg.bounds;
    // Ground-truth map over the whole world: goal validity and metrics.
    let world_center = bounds.center();
    let covering = world
        .points
        .iter()
        .map(|p| (p - world_center).norm())
        .fold(bounds.extent().norm() * 0.5, f64::max)
        + 1.0;
    let ground = InstanceMap::build_bounded(
        world,
        world_center,
        covering,
        mission_cfg.inflation,
        bounds,
    );

    let goal_free =
        bounds.contains(goal) && ground.signed_distance(goal) >= planner_cfg.d_safe;

    let buffer = MapBuffer::new(InstanceMap::build_bounded(
        world,
        start.position,
        mission_cfg.map_radius,
        mission_cfg.inflation,
        bounds,
    ));

    let mut log = MissionLog {
        outcome: MissionOutcome::Timeout,
        initial_state: MissionState::Wait,
        events: Vec::new(),
        episodes: Vec::new(),
        executed: Vec::new(),
        replans: 0,
        min_clearance: f64::INFINITY,
        ticks: 0,
        goal: arr(goal),
    };

    let mut state = MissionState::Wait;
    let mut position = start.position;
    let mut velocity = start.velocity;
    let mut yaw = 0.0;
    let mut trajectory: Option<ActiveTrajectory> = None;
    let mut attempts_this_episode = 0u32;
    let mut attempt_counter = 0u64;
    let mut next_episode_after_collision = false;

    let dt = mission_cfg.tick_dt;
    let tau = mission_cfg.plant_tau;

    let emit = |log: &mut MissionLog, state: &mut MissionState, tick: u64, ev: MissionEvent| {
        *state = transition(*state, ev);
        log.events.push(EventRecord {
            tick,
            event: ev,
            state_after: *state,
        });
    };

    for tick in 0..mission_cfg.max_ticks {
        log.ticks = tick + 1;
        // Fresh scan: rebuild the local map and publish it.
        buffer.install(InstanceMap::build_bounded(
            world,
            position,
            mission_cfg.map_radius,
            mission_cfg.inflation,
            bounds,
        ));

        log.min_clearance = log.min_clearance.min(ground.signed_distance(&position));

        if mission_cfg.fault_at_tick == Some(tick) && state == MissionState::Exec {
            emit(&mut log, &mut state, tick, MissionEvent::SuddenChange);
            log.outcome = MissionOutcome::SensorFault;
            return Err(MissionError::SensorFault { log: Box::new(log) });
        }

        match state {
            MissionState::Wait => {
                // Hold position while idle.
                velocity += (Vector3::zeros() - velocity) * (dt / tau);
                position += velocity * dt;
                if goal_free {
                    emit(&mut log, &mut state, tick, MissionEvent::HaveGoal);
                    attempts_this_episode = 0;
                } else {
                    emit(&mut log, &mut state, tick, MissionEvent::NoGoal);
                    // The world is static, so an occupied goal never frees up.
                    log.outcome = MissionOutcome::GoalOccupied;
                    return Err(MissionError::GoalOccupied { log: Box::new(log) });
                }
            }
            MissionState::Gen => {
                velocity += (Vector3::zeros() - velocity) * (dt / tau);
                position += velocity * dt;

                let snapshot = buffer.snapshot();
                let mut cfg = planner_cfg.clone();
                cfg.seed = derive_seed(planner_cfg.seed, attempt_counter);
                attempt_counter += 1;
                attempts_this_episode += 1;

                let planned = plan_and_select(&snapshot.map, &position, goal, &cfg)
                    .ok()
                    .and_then(|(selected, _)| {
                        let x_now = State {
                            position,
                            velocity,
                            orientation: Vector3::zeros(),
                            angular_velocity: Vector3::zeros(),
                        };
                        smooth_path(&selected, &x_now, &snapshot.map, smoother_cfg, params)
                            .ok()
                            .map(|segments| (selected, segments))
                    });

                match planned {
                    Some((selected, segments)) => {
                        let positions = chained_positions(&segments);
                        let spline = fit_bspline(&positions, mission_cfg.speed);
                        log.episodes.push(EpisodeRecord {
                            tick,
                            snapshot_id: snapshot.id,
                            attempts: attempts_this_episode,
                            planned_waypoints: selected.waypoints.iter().map(arr).collect(),
                            planned_length: selected.length(),
                            selected_cost: selected.cost,
                            selected_clearance: selected.min_clearance,
                            after_collision: next_episode_after_collision,
                        });
                        next_episode_after_collision = false;
                        trajectory = Some(ActiveTrajectory { spline, t: 0.0 });
                        emit(&mut log, &mut state, tick, MissionEvent::PlanSuccess);
                    }
                    None => {
                        if attempts_this_episode < mission_cfg.max_plan_attempts {
                            emit(&mut log, &mut state, tick, MissionEvent::PlanNotSuccess);
                        } else {
                            emit(&mut log, &mut state, tick, MissionEvent::PlanCannotBeFound);
                            log.outcome = MissionOutcome::PlanningFailed;
                            return Err(MissionError::PlanningFailed { log: Box::new(log) });
                        }
                    }
                }
            }
            MissionState::Exec => {
                let traj = trajectory.as_mut().expect("Exec requires a trajectory");
                traj.t += dt;
                let t_sample = traj.t.min(traj.spline.duration());
                let (p_des, v_des, _) =
                    sample(&traj.spline, t_sample).expect("sample within domain");
                let yaw_des = if v_des.xy().norm() > 0.05 {
                    v_des.y.atan2(v_des.x)
                } else {
                    yaw
                };
                let actual = Odometry {
                    position,
                    velocity,
                    yaw,
                    timestamp: tick as f64 * dt,
                };
                let desired = Odometry {
                    position: p_des,
                    velocity: v_des,
                    yaw: yaw_des,
                    timestamp: tick as f64 * dt,
                };
                let (v_cmd, yaw_cmd) = pd_command(&actual, &desired, &mission_cfg.gains);
                velocity += (v_cmd - velocity) * (dt / tau);
                position += velocity * dt;
                yaw += wrap_angle(yaw_cmd - yaw) * (dt / tau);
                log.executed.push(ExecutedSample {
                    tick,
                    time: tick as f64 * dt,
                    position: arr(&position),
                    velocity: arr(&velocity),
                    yaw,
                });

                if (position - goal).norm() <= planner_cfg.goal_tolerance {
                    emit(&mut log, &mut state, tick, MissionEvent::GoalReached);
                    log.outcome = MissionOutcome::GoalReached;
                    log.min_clearance = log.min_clearance.min(ground.signed_distance(&position));
                    return Ok(log);
                }

                // Look-ahead collision check on the freshest snapshot.
                let snapshot = buffer.snapshot();
                let window_end = (traj.t + mission_cfg.lookahead).min(traj.spline.duration());
                let mut t_check = traj.t;
                let mut collision = false;
                while t_check <= window_end {
                    let (p, _, _) = sample(&traj.spline, t_check).expect("within domain");
                    if snapshot.map.signed_distance(&p) < planner_cfg.d_safe {
                        collision = true;
                        break;
                    }
                    t_check += dt;
                }

                if collision {
                    emit(&mut log, &mut state, tick, MissionEvent::CollisionDetected);
                    log.replans += 1;
                    next_episode_after_collision = true;
                    attempts_this_episode = 0;
                    trajectory = None;
                } else if traj.t >= traj.spline.duration() {
                    // Trajectory consumed: this episode's goal is reached;
                    // the mission goal, if farther, restarts planning.
                    emit(&mut log, &mut state, tick, MissionEvent::GoalReached);
                    trajectory = None;
                } else {
                    emit(&mut log, &mut state, tick, MissionEvent::InProgress);
                }
            }
        }
    }

    log.outcome = MissionOutcome::Timeout;
    Err(MissionError::Timeout { log: Box::new(log) })
}

/// Convenience wrapper: builds the world from a spec and runs the mission.
pub fn run_mission_in_world(
    spec: &WorldSpec,
    start: &State,
    goal: &Vector3<f64>,
    planner_cfg: &PlannerConfig,
    smoother_cfg: &SmootherConfig,
    params: &VehicleParams,
    mission_cfg: &MissionConfig,
) -> Result<MissionLog, MissionError> {
    let world = random_world(spec);
    run_mission(
        &world,
        start,
        goal,
        planner_cfg,
        smoother_cfg,
        params,
        mission_cfg,
    )
}
