//! Quadrotor rigid-body dynamics.
//!
//! The vehicle state is 12-dimensional: position, velocity, a rotation-vector
//! orientation (axis times angle) and body angular velocity. The four control
//! inputs are rotor thrusts. Continuous dynamics follow the standard
//! rotation-vector quadcopter model: translational acceleration from total
//! thrust along the body z-axis with linear drag, rotation-vector kinematics
//! with a series fallback near zero angle, and Euler rigid-body angular
//! acceleration from the rotor moments.
//!
//! Discrete propagation is classical RK4 with zero-order-hold controls, and
//! the linearization returns Jacobians of the discrete RK4 map via central
//! finite differences so rollouts and Riccati passes see the same dynamics.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3, Vector4};

/// State dimension.
pub const N_STATES: usize = 12;
/// Control dimension.
pub const N_CONTROLS: usize = 4;

/// 12-dimensional flat state vector `[p v r w]`.
pub type StateVector = SVector<f64, N_STATES>;

/// Vehicle state: position, velocity, rotation-vector orientation, body rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    /// Position, meters, world frame.
    pub position: Vector3<f64>,
    /// Velocity, m/s, world frame.
    pub velocity: Vector3<f64>,
    /// Orientation as a rotation vector (axis · angle), radians.
    pub orientation: Vector3<f64>,
    /// Angular velocity, rad/s, body frame.
    pub angular_velocity: Vector3<f64>,
}

impl State {
    /// Rest state at `position` with identity attitude.
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            orientation: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.position);
        x.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        x.fixed_rows_mut::<3>(6).copy_from(&self.orientation);
        x.fixed_rows_mut::<3>(9).copy_from(&self.angular_velocity);
        x
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            position: x.fixed_rows::<3>(0).into(),
            velocity: x.fixed_rows::<3>(3).into(),
            orientation: x.fixed_rows::<3>(6).into(),
            angular_velocity: x.fixed_rows::<3>(9).into(),
        }
    }
}

/// Rotor thrust inputs, newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub thrusts: Vector4<f64>,
}

impl Control {
    pub fn new(u1: f64, u2: f64, u3: f64, u4: f64) -> Self {
        Self {
            thrusts: Vector4::new(u1, u2, u3, u4),
        }
    }

    pub fn zero() -> Self {
        Self {
            thrusts: Vector4::zeros(),
        }
    }

    /// Thrusts balancing gravity with level attitude.
    pub fn hover(params: &VehicleParams) -> Self {
        Self {
            thrusts: Vector4::repeat(params.mass * params.gravity / 4.0),
        }
    }

    pub fn total_thrust(&self) -> f64 {
        self.thrusts.sum()
    }
}

/// Physical vehicle parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// Mass, kg.
    pub mass: f64,
    /// Inertia, kg·m², symmetric positive definite.
    pub inertia: Matrix3<f64>,
    /// Center-to-rotor arm length, m.
    pub arm_length: f64,
    /// Linear drag constant.
    pub k_v: f64,
    /// Rotor moment constant.
    pub k_m: f64,
    /// Gravity, m/s².
    pub gravity: f64,
    /// Optional per-rotor thrust clamp `[min, max]`, applied on propagation.
    pub thrust_limits: Option<[f64; 2]>,
    inertia_inv: Matrix3<f64>,
}

impl VehicleParams {
    pub fn new(
        mass: f64,
        inertia: Matrix3<f64>,
        arm_length: f64,
        k_v: f64,
        k_m: f64,
        gravity: f64,
        thrust_limits: Option<[f64; 2]>,
    ) -> Self {
        assert!(mass > 0.0 && arm_length > 0.0 && gravity > 0.0);
        let inertia_inv = inertia
            .try_inverse()
            .expect("inertia matrix must be invertible");
        Self {
            mass,
            inertia,
            arm_length,
            k_v,
            k_m,
            gravity,
            thrust_limits,
            inertia_inv,
        }
    }

    pub fn inertia_inv(&self) -> &Matrix3<f64> {
        &self.inertia_inv
    }

    fn clamp(&self, u: &Vector4<f64>) -> Vector4<f64> {
        match self.thrust_limits {
            Some([lo, hi]) => u.map(|t| t.clamp(lo, hi)),
            None => *u,
        }
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::new(
            0.5,
            Matrix3::from_diagonal(&Vector3::new(3.2e-3, 3.2e-3, 5.5e-3)),
            0.17,
            0.25,
            0.025,
            9.81,
            None,
        )
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Rotation matrix `exp([r])` by the Rodrigues closed form, with a series
/// fallback near zero angle.
pub fn rotation_from_vector(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = r.norm_squared();
    let rx = skew(r);
    if theta2 < 1e-16 {
        let a = 1.0 - theta2 / 6.0;
        let b = 0.5 - theta2 / 24.0;
        return Matrix3::identity() + rx * a + rx * rx * b;
    }
    let theta = theta2.sqrt();
    Matrix3::identity() + rx * (theta.sin() / theta) + rx * rx * ((1.0 - theta.cos()) / theta2)
}

/// Rotation-vector kinematics coefficient for the `[r]²w` term.
///
/// Closed form `(1 − (θ/2)·cot(θ/2))/θ²`, second-order series below 1e−4.
fn rotation_rate_coefficient(theta: f64) -> f64 {
    if theta < 1e-4 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * (half.cos() / half.sin())) / (theta * theta)
    }
}

fn f_vector(x: &StateVector, u: &Vector4<f64>, params: &VehicleParams) -> StateVector {
    let v: Vector3<f64> = x.fixed_rows::<3>(3).into();
    let r: Vector3<f64> = x.fixed_rows::<3>(6).into();
    let w: Vector3<f64> = x.fixed_rows::<3>(9).into();

    let thrust = u.sum();
    let body_z = rotation_from_vector(&r) * Vector3::z();
    let v_dot =
        -params.gravity * Vector3::z() + (thrust * body_z - params.k_v * v) / params.mass;

    let rx = skew(&r);
    let r_dot = w + 0.5 * (rx * w) + rotation_rate_coefficient(r.norm()) * (rx * (rx * w));

    let torque = params.arm_length * (u[1] - u[3]) * Vector3::x()
        + params.arm_length * (u[2] - u[0]) * Vector3::y()
        + params.k_m * (u[0] - u[1] + u[2] - u[3]) * Vector3::z();
    let w_dot = params.inertia_inv() * (torque - w.cross(&(params.inertia * w)));

    let mut dx = StateVector::zeros();
    dx.fixed_rows_mut::<3>(0).copy_from(&v);
    dx.fixed_rows_mut::<3>(3).copy_from(&v_dot);
    dx.fixed_rows_mut::<3>(6).copy_from(&r_dot);
    dx.fixed_rows_mut::<3>(9).copy_from(&w_dot);
    dx
}

/// Continuous-time dynamics `ẋ = f(x, u)`.
pub fn f_continuous(x: &State, u: &Control, params: &VehicleParams) -> State {
    State::from_vector(&f_vector(&x.to_vector(), &u.thrusts, params))
}

fn rk4_vector(x: &StateVector, u: &Vector4<f64>, dt: f64, params: &VehicleParams) -> StateVector {
    let u = params.clamp(u);
    let k1 = f_vector(x, &u, params);
    let k2 = f_vector(&(x + k1 * (dt / 2.0)), &u, params);
    let k3 = f_vector(&(x + k2 * (dt / 2.0)), &u, params);
    let k4 = f_vector(&(x + k3 * dt), &u, params);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Classical RK4 step with zero-order-hold controls.
pub fn rk4_step(x: &State, u: &Control, dt: f64, params: &VehicleParams) -> State {
    assert!(dt > 0.0, "time step must be positive");
    State::from_vector(&rk4_vector(&x.to_vector(), &u.thrusts, dt, params))
}

/// Linearization of the discrete RK4 map about `(x_ref, u_ref)`.
#[derive(Debug, Clone)]
pub struct LinearizedDynamics {
    /// State Jacobian of the RK4 step.
    pub a: SMatrix<f64, N_STATES, N_STATES>,
    /// Input Jacobian of the RK4 step.
    pub b: SMatrix<f64, N_STATES, N_CONTROLS>,
    pub x_ref: State,
    pub u_ref: Control,
    pub dt: f64,
}

/// Central-difference Jacobians of the RK4 step at `(x_ref, u_ref)` with an
/// explicit relative step scale (per component, floored at the scale itself).
pub fn rk4_jacobians_with_step(
    x_ref: &State,
    u_ref: &Control,
    dt: f64,
    params: &VehicleParams,
    step_scale: f64,
) -> (
    SMatrix<f64, N_STATES, N_STATES>,
    SMatrix<f64, N_STATES, N_CONTROLS>,
) {
    let x0 = x_ref.to_vector();
    let u0 = u_ref.thrusts;
    let mut a = SMatrix::<f64, N_STATES, N_STATES>::zeros();
    let mut b = SMatrix::<f64, N_STATES, N_CONTROLS>::zeros();

    for i in 0..N_STATES {
        let h = step_scale * x0[i].abs().max(1.0);
        let mut xp = x0;
        let mut xm = x0;
        xp[i] += h;
        xm[i] -= h;
        let col = (rk4_vector(&xp, &u0, dt, params) - rk4_vector(&xm, &u0, dt, params)) / (2.0 * h);
        a.set_column(i, &col);
    }
    for j in 0..N_CONTROLS {
        let h = step_scale * u0[j].abs().max(1.0);
        let mut up = u0;
        let mut um = u0;
        up[j] += h;
        um[j] -= h;
        let col = (rk4_vector(&x0, &up, dt, params) - rk4_vector(&x0, &um, dt, params)) / (2.0 * h);
        b.set_column(j, &col);
    }
    (a, b)
}

/// Default finite-difference step scale: balances truncation against
/// round-off for a second-order central difference.
pub const JACOBIAN_STEP_SCALE: f64 = 1e-5;

/// Discrete-time linearization of the RK4 map at `(x_ref, u_ref)`.
pub fn linearize(
    x_ref: &State,
    u_ref: &Control,
    dt: f64,
    params: &VehicleParams,
) -> LinearizedDynamics {
    assert!(dt > 0.0);
    let (a, b) = rk4_jacobians_with_step(x_ref, u_ref, dt, params, JACOBIAN_STEP_SCALE);
    LinearizedDynamics {
        a,
        b,
        x_ref: *x_ref,
        u_ref: *u_ref,
        dt,
    }
}
