//! Scenario files.
//!
//! A scenario is one human-editable TOML document holding the world, the
//! start/goal pair and every stage's configuration, so benchmark and mission
//! setups stay versionable. Omitted fields take the documented defaults;
//! `start` and `goal` are required.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use kinoplan::dynamics::VehicleParams;
use kinoplan::geometry::Aabb;
use kinoplan::io::read_point_cloud;
use kinoplan::map::{PointCloud, WorldSpec};
use kinoplan::mission::MissionConfig;
use kinoplan::planners::PlannerConfig;
use kinoplan::smoothing::SmootherConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {reason}")]
    Validation { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// World description: either a seeded random obstacle cube or a point-cloud
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub n_obstacles: usize,
    pub cube_size: f64,
    pub obstacle_radius: f64,
    /// World seed; defaults to the scenario master seed.
    pub seed: Option<u64>,
    /// Point-cloud file path; overrides the random world when set.
    pub file: Option<String>,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            n_obstacles: 50,
            cube_size: 20.0,
            obstacle_radius: 0.5,
            seed: None,
            file: None,
        }
    }
}

/// Smoother weights in diagonal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmootherSection {
    pub dt: f64,
    pub position_weight: f64,
    pub velocity_weight: f64,
    pub attitude_weight: f64,
    pub rate_weight: f64,
    /// Terminal weight as a multiple of the stage weight.
    pub final_scale: f64,
    pub control_weight: f64,
    pub obstacle_scale: f64,
    pub d_active: f64,
    pub max_iter: usize,
    pub cost_tol: f64,
    pub reg0: f64,
    pub reg_max: f64,
    pub v_nom: f64,
    pub min_steps: usize,
    pub max_steps: usize,
}

impl Default for SmootherSection {
    fn default() -> Self {
        let cfg = SmootherConfig::default();
        Self {
            dt: cfg.dt,
            position_weight: 1.0,
            velocity_weight: 0.1,
            attitude_weight: 0.01,
            rate_weight: 0.01,
            final_scale: 50.0,
            control_weight: 0.1,
            obstacle_scale: cfg.obstacle_scale,
            d_active: cfg.d_active,
            max_iter: cfg.max_iter,
            cost_tol: cfg.cost_tol,
            reg0: cfg.reg0,
            reg_max: cfg.reg_max,
            v_nom: cfg.v_nom,
            min_steps: cfg.min_steps,
            max_steps: cfg.max_steps,
        }
    }
}

impl SmootherSection {
    pub fn to_config(&self) -> SmootherConfig {
        let mut q_stage = nalgebra::SMatrix::<f64, 12, 12>::zeros();
        for i in 0..3 {
            q_stage[(i, i)] = self.position_weight;
            q_stage[(3 + i, 3 + i)] = self.velocity_weight;
            q_stage[(6 + i, 6 + i)] = self.attitude_weight;
            q_stage[(9 + i, 9 + i)] = self.rate_weight;
        }
        SmootherConfig {
            dt: self.dt,
            q_stage,
            q_final: q_stage * self.final_scale,
            r_ctrl: nalgebra::SMatrix::<f64, 4, 4>::identity() * self.control_weight,
            obstacle_scale: self.obstacle_scale,
            d_active: self.d_active,
            max_iter: self.max_iter,
            cost_tol: self.cost_tol,
            reg0: self.reg0,
            reg_max: self.reg_max,
            v_nom: self.v_nom,
            min_steps: self.min_steps,
            max_steps: self.max_steps,
        }
    }
}

/// Vehicle parameters with a diagonal inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleSection {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub arm_length: f64,
    pub k_v: f64,
    pub k_m: f64,
    pub gravity: f64,
    pub thrust_limits: Option<[f64; 2]>,
}

impl Default for VehicleSection {
    fn default() -> Self {
        Self {
            mass: 0.5,
            inertia: [3.2e-3, 3.2e-3, 5.5e-3],
            arm_length: 0.17,
            k_v: 0.25,
            k_m: 0.025,
            gravity: 9.81,
            thrust_limits: None,
        }
    }
}

impl VehicleSection {
    pub fn to_params(&self) -> VehicleParams {
        VehicleParams::new(
            self.mass,
            Matrix3::from_diagonal(&Vector3::from(self.inertia)),
            self.arm_length,
            self.k_v,
            self.k_m,
            self.gravity,
            self.thrust_limits,
        )
    }
}

/// One fully described run: world, endpoints, and per-stage configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Master seed: every derived randomness source hangs off it.
    pub seed: u64,
    pub start: Option<[f64; 3]>,
    pub goal: Option<[f64; 3]>,
    pub world: WorldSection,
    pub planner: PlannerConfig,
    pub smoother: SmootherSection,
    pub vehicle: VehicleSection,
    pub mission: MissionConfig,
}

impl ScenarioSpec {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn start_vec(&self) -> Vector3<f64> {
        Vector3::from(self.start.expect("validated scenario has a start"))
    }

    pub fn goal_vec(&self) -> Vector3<f64> {
        Vector3::from(self.goal.expect("validated scenario has a goal"))
    }

    /// World bounds: the obstacle cube for random worlds, or the cloud's
    /// bounding cube (padded by the map radius) for file worlds.
    pub fn bounds(&self, cloud: &PointCloud) -> Aabb {
        if self.world.file.is_some() {
            let mut min = Vector3::repeat(f64::INFINITY);
            let mut max = Vector3::repeat(f64::NEG_INFINITY);
            for p in &cloud.points {
                min = min.inf(p);
                max = max.sup(p);
            }
            for v in [self.start_vec(), self.goal_vec()] {
                min = min.inf(&v);
                max = max.sup(&v);
            }
            let pad = Vector3::repeat(self.mission.map_radius);
            Aabb::new(min - pad, max + pad)
        } else {
            Aabb::new(Vector3::zeros(), Vector3::repeat(self.world.cube_size))
        }
    }

    /// World spec for generated worlds (seed resolved to the master seed
    /// when unset).
    pub fn world_spec(&self) -> WorldSpec {
        WorldSpec::new(
            self.world.n_obstacles,
            self.world.cube_size,
            self.world.obstacle_radius,
            self.world.seed.unwrap_or(self.seed),
        )
    }

    /// Loads or generates the obstacle cloud.
    pub fn load_world(&self, base_dir: &Path) -> Result<PointCloud, ScenarioError> {
        match &self.world.file {
            Some(file) => {
                let path = base_dir.join(file);
                read_point_cloud(&path).map_err(|e| ScenarioError::Parse(e.to_string()))
            }
            None => Ok(kinoplan::map::random_world(&self.world_spec())),
        }
    }

    /// Planner config with scenario-level bounds and seed applied.
    pub fn planner_for(&self, cloud: &PointCloud) -> PlannerConfig {
        let mut cfg = self.planner.clone();
        cfg.bounds = self.bounds(cloud);
        cfg.seed = self.seed;
        cfg
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite3 = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        match &self.start {
            None => return Err(invalid("start", "required")),
            Some(s) if !finite3(s) => return Err(invalid("start", "must be finite")),
            _ => {}
        }
        match &self.goal {
            None => return Err(invalid("goal", "required")),
            Some(g) if !finite3(g) => return Err(invalid("goal", "must be finite")),
            _ => {}
        }
        if self.world.cube_size <= 0.0 {
            return Err(invalid("world.cube_size", "must be positive"));
        }
        if self.world.obstacle_radius < 0.0 {
            return Err(invalid("world.obstacle_radius", "must be non-negative"));
        }

        let p = &self.planner;
        if p.step <= 0.0 {
            return Err(invalid("planner.step", "must be positive"));
        }
        if p.rewire_radius <= 0.0 {
            return Err(invalid("planner.rewire_radius", "must be positive"));
        }
        if p.max_iterations == 0 {
            return Err(invalid("planner.max_iterations", "must be at least 1"));
        }
        if p.goal_tolerance <= 0.0 {
            return Err(invalid("planner.goal_tolerance", "must be positive"));
        }
        if p.horizon <= 0.0 {
            return Err(invalid("planner.horizon", "must be positive"));
        }
        if p.d_safe < 0.0 {
            return Err(invalid("planner.d_safe", "must be non-negative"));
        }
        if p.num_parallel == 0 {
            return Err(invalid("planner.num_parallel", "must be at least 1"));
        }
        if p.samples_n == 0 {
            return Err(invalid("planner.samples_n", "must be at least 1"));
        }
        if p.collision_step <= 0.0 {
            return Err(invalid("planner.collision_step", "must be positive"));
        }
        if !(0.0..=1.0).contains(&p.goal_bias) {
            return Err(invalid("planner.goal_bias", "must lie in [0, 1]"));
        }
        if p.grid_res <= 0.0 {
            return Err(invalid("planner.grid_res", "must be positive"));
        }

        let s = &self.smoother;
        if s.dt <= 0.0 {
            return Err(invalid("smoother.dt", "must be positive"));
        }
        for (key, val) in [
            ("smoother.position_weight", s.position_weight),
            ("smoother.velocity_weight", s.velocity_weight),
            ("smoother.attitude_weight", s.attitude_weight),
            ("smoother.rate_weight", s.rate_weight),
            ("smoother.obstacle_scale", s.obstacle_scale),
            ("smoother.d_active", s.d_active),
        ] {
            if val < 0.0 {
                return Err(invalid(key, "must be non-negative"));
            }
        }
        if s.control_weight <= 0.0 {
            return Err(invalid("smoother.control_weight", "must be positive"));
        }
        if s.final_scale <= 0.0 {
            return Err(invalid("smoother.final_scale", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(invalid("smoother.max_iter", "must be at least 1"));
        }
        if s.cost_tol <= 0.0 {
            return Err(invalid("smoother.cost_tol", "must be positive"));
        }
        if s.reg0 <= 0.0 || s.reg_max < s.reg0 {
            return Err(invalid("smoother.reg0", "need 0 < reg0 <= reg_max"));
        }
        if s.v_nom <= 0.0 {
            return Err(invalid("smoother.v_nom", "must be positive"));
        }
        if s.min_steps == 0 || s.max_steps < s.min_steps {
            return Err(invalid("smoother.min_steps", "need 1 <= min_steps <= max_steps"));
        }

        let v = &self.vehicle;
        if v.mass <= 0.0 {
            return Err(invalid("vehicle.mass", "must be positive"));
        }
        if v.inertia.iter().any(|&j| j <= 0.0) {
            return Err(invalid("vehicle.inertia", "diagonal must be positive"));
        }
        if v.arm_length <= 0.0 {
            return Err(invalid("vehicle.arm_length", "must be positive"));
        }
        if v.gravity <= 0.0 {
            return Err(invalid("vehicle.gravity", "must be positive"));
        }
        if v.k_v < 0.0 {
            return Err(invalid("vehicle.k_v", "must be non-negative"));
        }
        if let Some([lo, hi]) = v.thrust_limits {
            if lo > hi {
                return Err(invalid("vehicle.thrust_limits", "lower bound exceeds upper"));
            }
        }

        let m = &self.mission;
        if m.tick_dt <= 0.0 {
            return Err(invalid("mission.tick_dt", "must be positive"));
        }
        if m.plant_tau <= 0.0 {
            return Err(invalid("mission.plant_tau", "must be positive"));
        }
        if m.lookahead < 0.0 {
            return Err(invalid("mission.lookahead", "must be non-negative"));
        }
        if m.map_radius <= 0.0 {
            return Err(invalid("mission.map_radius", "must be positive"));
        }
        if m.inflation < 0.0 {
            return Err(invalid("mission.inflation", "must be non-negative"));
        }
        if m.max_ticks == 0 {
            return Err(invalid("mission.max_ticks", "must be at least 1"));
        }
        if m.max_plan_attempts == 0 {
            return Err(invalid("mission.max_plan_attempts", "must be at least 1"));
        }
        if m.speed <= 0.0 {
            return Err(invalid("mission.speed", "must be positive"));
        }
        if m.gains.kp.iter().chain(m.gains.kd.iter()).any(|&g| g < 0.0) || m.gains.kp_yaw < 0.0 {
            return Err(invalid("mission.gains", "must be non-negative"));
        }
        Ok(())
    }
}

/// Parses and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}

/// Parses and validates scenario text.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec =
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "start = [1.0, 1.0, 1.0]\ngoal = [19.0, 19.0, 19.0]\n\n[world]\nseed = 7\n"
    }

    #[test]
    fn minimal_scenario_gets_defaults() {
        let spec = parse_scenario_str(minimal()).unwrap();
        assert_eq!(spec.world.n_obstacles, 50);
        assert_eq!(spec.world.cube_size, 20.0);
        assert_eq!(spec.world.seed, Some(7));
        assert_eq!(spec.planner, PlannerConfig::default());
        assert_eq!(spec.mission, MissionConfig::default());
        assert_eq!(spec.world_spec().seed, 7);
    }

    #[test]
    fn validation_names_offending_key() {
        let text = format!("{}\n[planner]\nd_safe = -0.5\n", minimal());
        let err = parse_scenario_str(&text).unwrap_err();
        match err {
            ScenarioError::Validation { key, .. } => assert_eq!(key, "planner.d_safe"),
            other => panic!("unexpected {other:?}"),
        }

        let err = parse_scenario_str("goal = [1.0, 1.0, 1.0]\n").unwrap_err();
        match err {
            ScenarioError::Validation { key, .. } => assert_eq!(key, "start"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_parse_errors() {
        let text = format!("{}\nnot_a_field = 3\n", minimal());
        assert!(matches!(
            parse_scenario_str(&text),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn defaults_round_trip() {
        let mut spec = ScenarioSpec::default();
        spec.start = Some([1.0, 1.0, 1.0]);
        spec.goal = Some([19.0, 19.0, 19.0]);
        let text = spec.to_toml();
        let reparsed = parse_scenario_str(&text).unwrap();
        assert_eq!(spec, reparsed);
    }

    #[test]
    fn planner_bounds_come_from_the_world_cube() {
        let spec = parse_scenario_str(minimal()).unwrap();
        let cloud = spec.load_world(Path::new(".")).unwrap();
        let cfg = spec.planner_for(&cloud);
        assert_eq!(cfg.bounds.min, Vector3::zeros());
        assert_eq!(cfg.bounds.max, Vector3::repeat(20.0));
        assert_eq!(cfg.seed, spec.seed);
    }
}
