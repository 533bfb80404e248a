//! Finite-horizon iLQR path smoothing.
//!
//! A geometric path is turned into a dynamically feasible trajectory by
//! running iLQR segment by segment: consecutive waypoint midpoints bound each
//! segment, and every segment starts from the exact terminal state of its
//! predecessor so the chained trajectory is continuous. Each iLQR solve
//! alternates a forward RK4 rollout, quadratization of the tracking +
//! obstacle cost with linearized dynamics, a regularized backward Riccati
//! pass, and a backtracking line search that only accepts cost decreases.
//! States always come from a rollout of the returned controls, so dynamic
//! feasibility holds by construction.
//!
//! The obstacle term sums `q·exp(−d_i)` over obstacles near the position; it
//! is quadratized with its analytic gradient along the signed-distance
//! direction and a PSD Gauss-Newton Hessian.

use nalgebra::{SMatrix, SVector, Vector3};
use thiserror::Error;

use crate::dynamics::{
    linearize, rk4_step, Control, State, VehicleParams, N_CONTROLS, N_STATES,
};
use crate::map::InstanceMap;
use crate::planners::PathCandidate;

/// Backtracking line-search halvings; the deepest step is 2^{-10}, fine
/// enough for the stiff gradients of obstacle-soaked rollouts.
const LINE_SEARCH_STEPS: usize = 11;

type Mat12 = SMatrix<f64, N_STATES, N_STATES>;
type Mat12x4 = SMatrix<f64, N_STATES, N_CONTROLS>;
type Mat4 = SMatrix<f64, N_CONTROLS, N_CONTROLS>;
type Mat4x12 = SMatrix<f64, N_CONTROLS, N_STATES>;
type Vec12 = SVector<f64, N_STATES>;
type Vec4 = SVector<f64, N_CONTROLS>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothError {
    #[error("Riccati pass found no cost-decreasing step{}", segment.map(|i| format!(" in segment {i}")).unwrap_or_default())]
    RiccatiFailure { segment: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct SmootherConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Stage state weight (PSD).
    pub q_stage: Mat12,
    /// Terminal state weight (PSD).
    pub q_final: Mat12,
    /// Control weight (PD).
    pub r_ctrl: Mat4,
    /// Obstacle cost scale.
    pub obstacle_scale: f64,
    /// Obstacles beyond this signed distance are ignored, m.
    pub d_active: f64,
    pub max_iter: usize,
    /// Relative cost-change convergence tolerance.
    pub cost_tol: f64,
    /// Initial Riccati regularization.
    pub reg0: f64,
    /// Regularization ceiling before giving up.
    pub reg_max: f64,
    /// Nominal speed used to size segment horizons, m/s.
    pub v_nom: f64,
    pub min_steps: usize,
    pub max_steps: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        let mut q_stage = Mat12::zeros();
        for i in 0..3 {
            q_stage[(i, i)] = 1.0; // position
            q_stage[(3 + i, 3 + i)] = 0.1; // velocity
            q_stage[(6 + i, 6 + i)] = 0.01; // orientation
            q_stage[(9 + i, 9 + i)] = 0.01; // body rates
        }
        Self {
            dt: 0.05,
            q_stage,
            q_final: q_stage * 50.0,
            r_ctrl: Mat4::identity() * 0.1,
            // Per-point equivalent of a per-obstacle weight of 50: the map
            // represents one obstacle as a shell of ~26 points.
            obstacle_scale: 2.0,
            d_active: 3.0,
            max_iter: 60,
            cost_tol: 1e-4,
            reg0: 1e-6,
            reg_max: 1e10,
            v_nom: 1.5,
            min_steps: 8,
            max_steps: 400,
        }
    }
}

impl SmootherConfig {
    /// Horizon steps for a segment of the given length.
    pub fn steps_for(&self, length: f64) -> usize {
        ((length / (self.v_nom * self.dt)).ceil() as usize).clamp(self.min_steps, self.max_steps)
    }
}

/// Time-indexed state/control rollout; `states[k+1]` is exactly the RK4
/// image of `(states[k], controls[k])`.
#[derive(Debug, Clone)]
pub struct TrajectorySegment {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub total_cost: f64,
    pub iterations: usize,
    /// Cost after the initial rollout and after every accepted iteration.
    pub cost_history: Vec<f64>,
}

impl TrajectorySegment {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    /// Worst one-step rollout defect, for feasibility audits.
    pub fn dynamics_defect(&self, dt: f64, params: &VehicleParams) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.controls.len() {
            let propagated = rk4_step(&self.states[k], &self.controls[k], dt, params);
            worst = worst.max((propagated.to_vector() - self.states[k + 1].to_vector()).amax());
        }
        worst
    }
}

/// Tracking + obstacle stage cost.
///
/// `(x−x_ref)ᵀQ(x−x_ref) + (u−u_ref)ᵀR(u−u_ref) + q·Σ_i exp(−d_i(x))`, the
/// obstacle sum running over obstacles within `d_active` of the position.
pub fn stage_cost(
    x: &State,
    u: &Control,
    x_ref: &State,
    u_ref: &Control,
    map: &InstanceMap,
    cfg: &SmootherConfig,
) -> f64 {
    let dx = x.to_vector() - x_ref.to_vector();
    let du = u.thrusts - u_ref.thrusts;
    (dx.transpose() * cfg.q_stage * dx)[0]
        + (du.transpose() * cfg.r_ctrl * du)[0]
        + obstacle_cost(&x.position, map, cfg)
}

fn obstacle_cost(p: &Vector3<f64>, map: &InstanceMap, cfg: &SmootherConfig) -> f64 {
    if map.is_empty() || cfg.obstacle_scale == 0.0 {
        return 0.0;
    }
    cfg.obstacle_scale
        * map
            .obstacles_within(p, cfg.d_active)
            .iter()
            .map(|(_, d)| (-d).exp())
            .sum::<f64>()
}

fn terminal_cost(x: &State, x_ref: &State, map: &InstanceMap, cfg: &SmootherConfig) -> f64 {
    let dx = x.to_vector() - x_ref.to_vector();
    (dx.transpose() * cfg.q_final * dx)[0] + obstacle_cost(&x.position, map, cfg)
}

/// Gradient and Gauss-Newton Hessian of the obstacle term in the position
/// block.
fn obstacle_quadratics(
    p: &Vector3<f64>,
    map: &InstanceMap,
    cfg: &SmootherConfig,
) -> (Vector3<f64>, SMatrix<f64, 3, 3>) {
    let mut grad = Vector3::zeros();
    let mut hess = SMatrix::<f64, 3, 3>::zeros();
    if map.is_empty() || cfg.obstacle_scale == 0.0 {
        return (grad, hess);
    }
    for (q, d) in map.obstacles_within(p, cfg.d_active) {
        let offset = p - q;
        let range = offset.norm();
        if range < 1e-9 {
            continue; // direction undefined exactly at the point
        }
        let dir = offset / range;
        let w = cfg.obstacle_scale * (-d).exp();
        grad -= dir * w;
        hess += dir * dir.transpose() * w;
    }
    (grad, hess)
}

/// First and second derivatives of the stage cost at `(x, u)`.
#[derive(Debug, Clone)]
pub struct CostTerms {
    pub grad_x: Vec12,
    pub grad_u: Vec4,
    pub hess_xx: Mat12,
    pub hess_uu: Mat4,
}

/// Quadratizes the stage cost about `(x, u)`.
pub fn stage_cost_terms(
    x: &State,
    u: &Control,
    x_ref: &State,
    u_ref: &Control,
    map: &InstanceMap,
    cfg: &SmootherConfig,
) -> CostTerms {
    let dx = x.to_vector() - x_ref.to_vector();
    let du = u.thrusts - u_ref.thrusts;
    let mut grad_x = cfg.q_stage * dx * 2.0;
    let mut hess_xx = cfg.q_stage * 2.0;
    let (og, oh) = obstacle_quadratics(&x.position, map, cfg);
    for i in 0..3 {
        grad_x[i] += og[i];
        for j in 0..3 {
            hess_xx[(i, j)] += oh[(i, j)];
        }
    }
    CostTerms {
        grad_x,
        grad_u: cfg.r_ctrl * du * 2.0,
        hess_xx,
        hess_uu: cfg.r_ctrl * 2.0,
    }
}

fn terminal_cost_terms(
    x: &State,
    x_ref: &State,
    map: &InstanceMap,
    cfg: &SmootherConfig,
) -> (Vec12, Mat12) {
    let dx = x.to_vector() - x_ref.to_vector();
    let mut grad = cfg.q_final * dx * 2.0;
    let mut hess = cfg.q_final * 2.0;
    let (og, oh) = obstacle_quadratics(&x.position, map, cfg);
    for i in 0..3 {
        grad[i] += og[i];
        for j in 0..3 {
            hess[(i, j)] += oh[(i, j)];
        }
    }
    (grad, hess)
}

/// One quadratized stage of the optimal-control problem.
#[derive(Debug, Clone)]
pub struct StageQuadratics {
    pub a: Mat12,
    pub b: Mat12x4,
    pub cost: CostTerms,
}

/// Result of the backward Riccati recursion.
pub struct BackwardPass {
    pub feedforward: Vec<Vec4>,
    pub feedback: Vec<Mat4x12>,
    /// Value-function quadratics at stage 0.
    pub value_x: Vec12,
    pub value_xx: Mat12,
    /// Expected cost decrease terms: `Δ(α) ≈ −(α·d1 + α²·d2)`.
    pub d1: f64,
    pub d2: f64,
}

/// Backward Riccati recursion over quadratized stages.
///
/// Returns `None` when the regularized control Hessian loses positive
/// definiteness at this regularization level.
pub fn backward_pass(
    stages: &[StageQuadratics],
    terminal: &(Vec12, Mat12),
    reg: f64,
) -> Option<BackwardPass> {
    let n = stages.len();
    let mut feedforward = vec![Vec4::zeros(); n];
    let mut feedback = vec![Mat4x12::zeros(); n];
    let mut v_x = terminal.0;
    let mut v_xx = terminal.1;
    let mut d1 = 0.0;
    let mut d2 = 0.0;

    for k in (0..n).rev() {
        let st = &stages[k];
        let q_x = st.cost.grad_x + st.a.transpose() * v_x;
        let q_u = st.cost.grad_u + st.b.transpose() * v_x;
        let q_xx = st.cost.hess_xx + st.a.transpose() * v_xx * st.a;
        let q_uu = st.cost.hess_uu + st.b.transpose() * v_xx * st.b;
        let q_ux = st.b.transpose() * v_xx * st.a;

        let q_uu_reg = q_uu + Mat4::identity() * reg;
        let chol = nalgebra::Cholesky::new(q_uu_reg)?;
        let k_ff = -chol.solve(&q_u);
        let k_fb = -chol.solve(&q_ux);

        d1 += (k_ff.transpose() * q_u)[0];
        d2 += 0.5 * (k_ff.transpose() * q_uu * k_ff)[0];

        v_x = q_x
            + k_fb.transpose() * q_uu * k_ff
            + k_fb.transpose() * q_u
            + q_ux.transpose() * k_ff;
        v_xx = q_xx + k_fb.transpose() * q_uu * k_fb + k_fb.transpose() * q_ux + q_ux.transpose() * k_fb;
        v_xx = (v_xx + v_xx.transpose()) * 0.5;

        feedforward[k] = k_ff;
        feedback[k] = k_fb;
    }

    Some(BackwardPass {
        feedforward,
        feedback,
        value_x: v_x,
        value_xx: v_xx,
        d1,
        d2,
    })
}

struct Problem<'a> {
    x_ref: State,
    u_ref: Control,
    map: &'a InstanceMap,
    cfg: &'a SmootherConfig,
    params: &'a VehicleParams,
}

impl Problem<'_> {
    fn rollout(&self, x0: &State, controls: &[Control]) -> Vec<State> {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(*x0);
        for u in controls {
            states.push(rk4_step(states.last().unwrap(), u, self.cfg.dt, self.params));
        }
        states
    }

    fn total_cost(&self, states: &[State], controls: &[Control]) -> f64 {
        let mut cost = 0.0;
        for (x, u) in states.iter().zip(controls.iter()) {
            cost += stage_cost(x, u, &self.x_ref, &self.u_ref, self.map, self.cfg);
        }
        cost + terminal_cost(states.last().unwrap(), &self.x_ref, self.map, self.cfg)
    }

    fn quadratize(&self, states: &[State], controls: &[Control]) -> (Vec<StageQuadratics>, (Vec12, Mat12)) {
        let stages = states[..controls.len()]
            .iter()
            .zip(controls.iter())
            .map(|(x, u)| {
                let lin = linearize(x, u, self.cfg.dt, self.params);
                StageQuadratics {
                    a: lin.a,
                    b: lin.b,
                    cost: stage_cost_terms(x, u, &self.x_ref, &self.u_ref, self.map, self.cfg),
                }
            })
            .collect();
        let terminal = terminal_cost_terms(states.last().unwrap(), &self.x_ref, self.map, self.cfg);
        (stages, terminal)
    }

    fn forward(
        &self,
        x0: &State,
        states: &[State],
        controls: &[Control],
        bp: &BackwardPass,
        alpha: f64,
    ) -> (Vec<State>, Vec<Control>) {
        let mut new_states = Vec::with_capacity(states.len());
        let mut new_controls = Vec::with_capacity(controls.len());
        new_states.push(*x0);
        for k in 0..controls.len() {
            let dx = new_states[k].to_vector() - states[k].to_vector();
            let u = controls[k].thrusts + bp.feedforward[k] * alpha + bp.feedback[k] * dx;
            let u = Control { thrusts: u };
            new_states.push(rk4_step(&new_states[k], &u, self.cfg.dt, self.params));
            new_controls.push(u);
        }
        (new_states, new_controls)
    }
}

/// iLQR solve toward a rest reference at `p_goal` over `steps` stages.
pub fn ilqr_segment_with_steps(
    x0: &State,
    p_goal: &Vector3<f64>,
    steps: usize,
    map: &InstanceMap,
    cfg: &SmootherConfig,
    params: &VehicleParams,
) -> Result<TrajectorySegment, SmoothError> {
    assert!(steps >= 1);
    let problem = Problem {
        x_ref: State::at_rest(*p_goal),
        u_ref: Control::hover(params),
        map,
        cfg,
        params,
    };

    let mut controls = vec![Control::hover(params); steps];
    let mut states = problem.rollout(x0, &controls);
    let mut cost = problem.total_cost(&states, &controls);
    let mut cost_history = vec![cost];
    let mut reg = cfg.reg0;
    let mut iterations = 0;

    let finish = |states, controls, cost, iterations, cost_history| TrajectorySegment {
        states,
        controls,
        total_cost: cost,
        iterations,
        cost_history,
    };

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let (stages, terminal) = problem.quadratize(&states, &controls);

        let mut accepted = false;
        loop {
            let Some(bp) = backward_pass(&stages, &terminal, reg) else {
                reg *= 10.0;
                if reg > cfg.reg_max {
                    return Err(SmoothError::RiccatiFailure { segment: None });
                }
                continue;
            };

            // Expected decrease at the smallest line-search step; once this
            // drops into float noise the solve has converged.
            let alpha_min = 0.5f64.powi(LINE_SEARCH_STEPS as i32 - 1);
            let expected_min = -(alpha_min * bp.d1 + alpha_min * alpha_min * bp.d2);
            if expected_min.abs() < 1e-10 * cost.abs().max(1.0) {
                return Ok(finish(states, controls, cost, iterations, cost_history));
            }

            let mut alpha = 1.0;
            for _ in 0..LINE_SEARCH_STEPS {
                let (new_states, new_controls) = problem.forward(x0, &states, &controls, &bp, alpha);
                let new_cost = problem.total_cost(&new_states, &new_controls);
                if new_cost < cost {
                    states = new_states;
                    controls = new_controls;
                    let improvement = (cost - new_cost) / cost.abs().max(1.0);
                    cost = new_cost;
                    cost_history.push(cost);
                    reg = (reg / 10.0).max(cfg.reg0);
                    accepted = true;
                    if improvement < cfg.cost_tol {
                        return Ok(finish(states, controls, cost, iterations, cost_history));
                    }
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
            reg *= 10.0;
            if reg > cfg.reg_max {
                // The truncated obstacle sum is discontinuous where points
                // cross the activation shell, so its minima can sit on a
                // cost cliff no step can descend. Once the solve has made
                // progress, a stalled line search is convergence; with no
                // progress at all it is a genuine failure.
                if cost_history.len() > 1 {
                    return Ok(finish(states, controls, cost, iterations, cost_history));
                }
                return Err(SmoothError::RiccatiFailure { segment: None });
            }
        }
    }

    Ok(finish(states, controls, cost, iterations, cost_history))
}

/// iLQR solve with the horizon sized from the start-goal distance.
pub fn ilqr_segment(
    x0: &State,
    p_goal: &Vector3<f64>,
    map: &InstanceMap,
    cfg: &SmootherConfig,
    params: &VehicleParams,
) -> Result<TrajectorySegment, SmoothError> {
    let steps = cfg.steps_for((p_goal - x0.position).norm());
    ilqr_segment_with_steps(x0, p_goal, steps, map, cfg, params)
}

/// Smooths a waypoint path by chained iLQR segments over waypoint midpoints.
///
/// For each consecutive waypoint triple the segment runs between the two
/// midpoints; a leading segment covers start→first midpoint and a trailing
/// segment covers last midpoint→final waypoint. Two-waypoint (and
/// single-waypoint) paths collapse to one direct segment. Every segment
/// starts at the exact terminal state of its predecessor.
pub fn smooth_path(
    path: &PathCandidate,
    x_start: &State,
    map: &InstanceMap,
    cfg: &SmootherConfig,
    params: &VehicleParams,
) -> Result<Vec<TrajectorySegment>, SmoothError> {
    let wps = &path.waypoints;
    assert!(!wps.is_empty(), "path must have at least one waypoint");

    let goals: Vec<Vector3<f64>> = match wps.len() {
        1 => vec![wps[0]],
        2 => vec![wps[1]],
        m => {
            let mut goals: Vec<Vector3<f64>> =
                wps.windows(2).map(|w| (w[0] + w[1]) * 0.5).collect();
            goals.push(wps[m - 1]);
            goals
        }
    };

    let mut segments = Vec::with_capacity(goals.len());
    let mut x_cur = *x_start;
    for (index, goal) in goals.iter().enumerate() {
        let seg = ilqr_segment(&x_cur, goal, map, cfg, params).map_err(|e| match e {
            SmoothError::RiccatiFailure { .. } => SmoothError::RiccatiFailure {
                segment: Some(index),
            },
        })?;
        x_cur = *seg.states.last().unwrap();
        segments.push(seg);
    }
    Ok(segments)
}

/// Positions of the chained segment states, without duplicating junctions.
pub fn chained_positions(segments: &[TrajectorySegment]) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let skip = usize::from(i > 0);
        out.extend(seg.states.iter().skip(skip).map(|s| s.position));
    }
    out
}
