//! Steering controller for a constant-speed single-track vehicle that keeps
//! a reference path (or goal point) with a second-order control Lyapunov
//! constraint and stays out of circular danger zones with second-order
//! control barrier constraints, both combined in a two-variable QP.
//!
//! The crate is organised bottom-up:
//!
//! * [`vehicle`]: 5-DOF lateral dynamics and an RK4 integrator.
//! * [`constraints`]: Lie-derivative chains of the distance-squared
//!   candidates and the affine QP rows built from them.
//! * [`qp`]: exact active-set solver for the slack-relaxed steering QP,
//!   with KKT certification.
//! * [`scenario`]: reference paths, moving obstacles and the built-in
//!   scenario catalogue.
//! * [`sim`]: the closed-loop executor and run metrics.

pub mod constraints;
pub mod error;
pub mod geometry;
pub mod qp;
pub mod scenario;
pub mod sim;
pub mod vehicle;

pub use constraints::{
    cbf_row, clf_row, lie_bundle, ConstraintRow, GainSet, LieBundle, ObstacleDisk, PointTarget,
    RowKind,
};
pub use error::{Error, Result};
pub use geometry::Point;
pub use qp::{certify_kkt, solve, KktReport, QpProblem, QpSolution, QpStatus};
pub use scenario::{
    build_scenario, Knot, MovingObstacle, Reference, ReferencePath, ScenarioConfig, ScenarioId,
};
pub use sim::{compute_metrics, run, run_with, ClosedLoop, Metrics, StepRecord, TrajectoryLog};
pub use vehicle::{
    derive_coefficients, ControlInput, LateralModel, ModelCoefficients, VehicleParams, VehicleState,
};
