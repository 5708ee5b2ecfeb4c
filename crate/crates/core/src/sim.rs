//! Closed-loop rollout and scenario metrics.
//!
//! Every step selects a target, builds one Lyapunov row, one barrier row per
//! obstacle and the steering box, solves the QP and integrates the vehicle
//! over `dt` with the resulting steering angle held. Obstacles are sampled
//! once per step at the step start.

use serde::{Deserialize, Serialize};

use crate::constraints::{cbf_row, clf_row, ConstraintRow, ObstacleDisk, PointTarget};
use crate::error::Result;
use crate::geometry::Point;
use crate::qp::{solve, QpProblem, QpSolution, QpStatus};
use crate::scenario::{Reference, ReferencePath, ScenarioConfig};
use crate::vehicle::{ControlInput, LateralModel, VehicleState};

/// Below this distance to a fixed goal the Lyapunov row is dropped and the
/// run ends: a constant-speed vehicle cannot hold position at the goal.
pub const GOAL_CAPTURE_RADIUS: f64 = 0.5;
/// A fixed goal counts as reached when the final distance is below this.
pub const GOAL_REACHED_RADIUS: f64 = 1.0;
/// Penetration below `r_o` tolerated before a step counts as a collision.
pub const COLLISION_TOLERANCE: f64 = 1e-6;
/// Lateral error under which the vehicle is back on its reference.
pub const RETURN_LATERAL_ERROR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub state: VehicleState,
    /// Steering angle applied over `[t, t + dt)`.
    pub delta_f: f64,
    pub slack: f64,
    pub status: QpStatus,
    /// Centre distance minus effective radius, per obstacle.
    pub clearances: Vec<f64>,
    /// Smallest barrier value over obstacles (`+inf` without obstacles).
    pub min_h: f64,
    pub lateral_error: f64,
    /// Target handed to the Lyapunov row.
    pub goal: Point,
}

impl StepRecord {
    pub fn min_clearance(&self) -> f64 {
        self.clearances
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub config: ScenarioConfig,
    pub records: Vec<StepRecord>,
}

/// Result of one closed-loop step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: VehicleState,
    pub record: StepRecord,
    pub problem: QpProblem,
    pub solution: QpSolution,
    /// Fixed goal captured; the run stops after this step.
    pub goal_captured: bool,
}

/// A validated config with its model and reference prepared.
#[derive(Debug, Clone)]
pub struct ClosedLoop<'a> {
    config: &'a ScenarioConfig,
    model: LateralModel,
    path: Option<ReferencePath>,
    /// Path used for lateral error: the reference path, or the straight
    /// segment from the start position to a fixed goal.
    error_path: ReferencePath,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(config: &'a ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let model = LateralModel::new(config.params)?;
        let (path, error_path) = match &config.reference {
            Reference::PathTracking { waypoints } => {
                let p = ReferencePath::new(waypoints.clone())?;
                (Some(p.clone()), p)
            }
            Reference::PointTracking { goal } => {
                let start = config.initial_state.position();
                // Degenerate when starting on the goal; fall back to a unit stub.
                let end = if start.distance(*goal) > 0.0 {
                    *goal
                } else {
                    Point::new(goal.x + 1.0, goal.y)
                };
                (None, ReferencePath::new(vec![start, end])?)
            }
        };
        Ok(Self {
            config,
            model,
            path,
            error_path,
        })
    }

    pub fn model(&self) -> &LateralModel {
        &self.model
    }

    pub fn config(&self) -> &ScenarioConfig {
        self.config
    }

    pub fn error_path(&self) -> &ReferencePath {
        &self.error_path
    }

    /// Inflated obstacle disks at time `t`.
    pub fn obstacles_at(&self, t: f64) -> Vec<ObstacleDisk> {
        (0..self.config.obstacles.len())
            .map(|i| ObstacleDisk {
                center: self.config.obstacles[i].position(t),
                radius: self.config.effective_radius(i),
            })
            .collect()
    }

    /// Lyapunov target for `position`; `true` when a fixed goal is captured.
    pub fn target(&self, position: Point) -> (PointTarget, bool) {
        match (&self.path, &self.config.reference) {
            (Some(path), _) => (path.target_point(position, self.config.lookahead), false),
            (None, Reference::PointTracking { goal }) => (
                PointTarget { position: *goal },
                position.distance(*goal) < GOAL_CAPTURE_RADIUS,
            ),
            (None, Reference::PathTracking { .. }) => unreachable!("path is built in new()"),
        }
    }

    /// QP for `state` at time `t`.
    pub fn problem(&self, state: &VehicleState, t: f64) -> (QpProblem, PointTarget, bool) {
        let gains = &self.config.gains;
        let (target, captured) = self.target(state.position());
        let mut rows = Vec::with_capacity(self.config.obstacles.len() + 4);
        if !captured {
            rows.push(clf_row(&target.bundle(state, &self.model), gains));
        }
        for (i, disk) in self.obstacles_at(t).iter().enumerate() {
            rows.push(cbf_row(&disk.bundle(state, &self.model), gains, i as u32));
        }
        rows.extend(ConstraintRow::steering_box(self.config.steering_bound));
        if self.config.nonnegative_slack {
            rows.push(ConstraintRow::nonnegative_slack());
        }
        let problem = QpProblem {
            u_ref: 0.0,
            q: gains.q,
            rows,
        };
        (problem, target, captured)
    }

    /// One control step from `state` at `t`. `prev_delta` is held when the QP
    /// is infeasible.
    pub fn step(&self, state: &VehicleState, t: f64, prev_delta: f64) -> StepOutcome {
        let bound = self.config.steering_bound;
        let (problem, target, goal_captured) = self.problem(state, t);
        let solution = solve(&problem);
        let (delta_f, slack) = match solution.status {
            QpStatus::Optimal => (solution.u_star.clamp(-bound, bound), solution.slack_star),
            QpStatus::Infeasible => (prev_delta.clamp(-bound, bound), 0.0),
        };

        let position = state.position();
        let disks = self.obstacles_at(t);
        let record = StepRecord {
            t,
            state: *state,
            delta_f,
            slack,
            status: solution.status,
            clearances: disks.iter().map(|d| d.clearance(position)).collect(),
            min_h: disks
                .iter()
                .map(|d| d.barrier(position))
                .fold(f64::INFINITY, f64::min),
            lateral_error: self.error_path.lateral_error(position),
            goal: target.position,
        };
        let next = self
            .model
            .integrate_step(state, &ControlInput::steer(delta_f), self.config.dt);
        StepOutcome {
            next,
            record,
            problem,
            solution,
            goal_captured,
        }
    }
}

/// Deterministic rollout of `config`.
pub fn run(config: &ScenarioConfig) -> Result<TrajectoryLog> {
    run_with(config, |_, _| {})
}

/// Like [`run`], handing every solved QP to `observe`.
pub fn run_with(
    config: &ScenarioConfig,
    mut observe: impl FnMut(&QpProblem, &QpSolution),
) -> Result<TrajectoryLog> {
    let cl = ClosedLoop::new(config)?;
    let steps = config.step_count();
    let mut records = Vec::with_capacity(steps + 1);
    let mut state = config.initial_state;
    let mut prev_delta = 0.0;
    for k in 0..=steps {
        let t = k as f64 * config.dt;
        let out = cl.step(&state, t, prev_delta);
        observe(&out.problem, &out.solution);
        prev_delta = out.record.delta_f;
        records.push(out.record);
        if out.goal_captured {
            break;
        }
        state = out.next;
    }
    Ok(TrajectoryLog {
        config: config.clone(),
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `+inf` when there are no obstacles; serialised as `null`.
    #[serde(with = "inf_as_null")]
    pub min_clearance: f64,
    #[serde(with = "inf_as_null")]
    pub min_h: f64,
    pub collision: bool,
    /// Over steps outside the avoidance window.
    pub max_lateral_error: f64,
    pub infeasible_steps: usize,
    pub goal_reached: bool,
    pub return_time: Option<f64>,
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Whether a record falls inside the avoidance window: some obstacle is
/// closer than twice its effective radius.
pub fn in_avoidance_window(config: &ScenarioConfig, record: &StepRecord) -> bool {
    record
        .clearances
        .iter()
        .enumerate()
        .any(|(i, &c)| c < 2.0 * config.effective_radius(i))
}

pub fn compute_metrics(log: &TrajectoryLog) -> Metrics {
    let cfg = &log.config;
    let recs = &log.records;
    assert!(!recs.is_empty(), "metrics of an empty log");

    let mut min_clearance = f64::INFINITY;
    let mut min_at = None;
    for (k, r) in recs.iter().enumerate() {
        let c = r.min_clearance();
        if c <= min_clearance && c.is_finite() {
            min_clearance = c;
            min_at = Some(k);
        }
    }
    let min_h = recs.iter().map(|r| r.min_h).fold(f64::INFINITY, f64::min);
    let collision = recs
        .iter()
        .any(|r| r.clearances.iter().any(|&c| c < -COLLISION_TOLERANCE));
    let max_lateral_error = recs
        .iter()
        .filter(|r| !in_avoidance_window(cfg, r))
        .map(|r| r.lateral_error)
        .fold(0.0, f64::max);
    let infeasible_steps = recs
        .iter()
        .filter(|r| r.status == QpStatus::Infeasible)
        .count();
    let goal_reached = match cfg.reference {
        Reference::PointTracking { goal } => {
            recs.last().unwrap().state.position().distance(goal) < GOAL_REACHED_RADIUS
        }
        Reference::PathTracking { .. } => false,
    };
    let return_time = min_at.and_then(|k| {
        recs[k..]
            .iter()
            .find(|r| r.lateral_error < RETURN_LATERAL_ERROR)
            .map(|r| r.t)
    });
    Metrics {
        min_clearance,
        min_h,
        collision,
        max_lateral_error,
        infeasible_steps,
        goal_reached,
        return_time,
    }
}
