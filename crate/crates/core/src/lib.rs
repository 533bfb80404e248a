//! # kinoplan
//!
//! Kinodynamic replanning for multirotor vehicles: per-scan instance maps with
//! double-buffered snapshots, an adaptive ellipsoidal search space with a
//! deterministic interior sample set, parallel multi-instance RRT* with
//! cost-based safe-path selection, iLQR smoothing under full quadrotor
//! dynamics, B-spline trajectory generation, and a replanning mission state
//! machine that ties the pipeline together in closed loop.
//!
//! The crate is organized as one module per pipeline stage:
//!
//! - [`map`] — point clouds, the R-tree instance map, signed-distance and
//!   segment-clearance queries, seeded random worlds.
//! - [`search_space`] — the ellipsoid between start and goal and its
//!   deterministic interior lattice.
//! - [`planners`] — improved/original RRT*, grid A*, horizon truncation and
//!   the parallel multi-instance planner with safe-path selection.
//! - [`dynamics`] — 12-state quadrotor model, RK4 propagation, finite
//!   difference linearization.
//! - [`smoothing`] — finite-horizon iLQR with obstacle-aware cost and
//!   midpoint path segmentation.
//! - [`trajectory`] — clamped cubic B-spline fitting and sampling.
//! - [`mission`] — Wait/Gen/Exec state machine, PD tracking regulator and
//!   the closed-loop simulation.

pub mod dynamics;
pub mod geometry;
pub mod io;
pub mod map;
pub mod mission;
pub mod planners;
pub mod search_space;
pub mod smoothing;
pub mod trajectory;

pub use geometry::Aabb;
pub use map::{InstanceMap, MapBuffer, PointCloud, WorldSpec};
pub use planners::{PathCandidate, PlannerConfig, SamplerMode};
pub use smoothing::{SmootherConfig, TrajectorySegment};
pub use trajectory::BSpline;
