//! Second-order Lyapunov and barrier constraints for the steering QP.
//!
//! Both candidates are squared distances to a point, `(x-cx)² + (y-cy)² - k`,
//! with `k = 0` for a goal and `k = r_o²` for an obstacle. Their derivative
//! chains along the lateral model are therefore identical apart from the
//! constant. Position depends on steering only through the side-slip angle,
//! so the input first appears in the second derivative.
//!
//! Rows are emitted in the QP decision variables `(u, δ)`, `u` being the
//! front steering angle and `δ` the Lyapunov slack, as
//! `a_u·u + a_s·δ ≤ b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::vehicle::{LateralModel, VehicleState};

/// Goal fed to the Lyapunov candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTarget {
    pub position: Point,
}

/// Circular danger zone with an already inflated radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleDisk {
    pub center: Point,
    pub radius: f64,
}

impl ObstacleDisk {
    /// Barrier value `d² - r_o²` at `p`.
    pub fn barrier(&self, p: Point) -> f64 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        dx * dx + dy * dy - self.radius * self.radius
    }

    /// Centre distance minus radius.
    pub fn clearance(&self, p: Point) -> f64 {
        p.distance(self.center) - self.radius
    }
}

/// Class-κ gains (linear) and slack penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    /// Lyapunov first-derivative gain (1/s).
    pub alpha1: f64,
    /// Lyapunov value gain (1/s²).
    pub alpha2: f64,
    /// Barrier first-derivative gain (1/s).
    pub alpha3: f64,
    /// Barrier value gain (1/s²).
    pub alpha4: f64,
    /// Slack penalty weight.
    pub q: f64,
}

impl Default for GainSet {
    fn default() -> Self {
        Self {
            alpha1: 6.0,
            alpha2: 16.0,
            alpha3: 8.0,
            alpha4: 16.0,
            q: 100.0,
        }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
            ("q", self.q),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidGains(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Value and derivative chain of a squared-distance candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieBundle {
    /// Candidate value.
    pub value: f64,
    /// First derivative along the drift (the input channel is zero).
    pub lf1: f64,
    /// Second derivative along the drift.
    pub lf2: f64,
    /// Coefficient of the steering angle in the second derivative.
    pub lglf: f64,
}

/// Derivative chain of `(x-cx)² + (y-cy)² - offset_sq` at `state`.
pub fn lie_bundle(
    state: &VehicleState,
    model: &LateralModel,
    center: Point,
    offset_sq: f64,
) -> LieBundle {
    let c = model.coeffs();
    let v = model.speed();
    let dx = state.x - center.x;
    let dy = state.y - center.y;
    let (sin, cos) = state.course().sin_cos();
    // d/d(beta) of lf1, equal to d/d(psi) of lf1.
    let lateral = -2.0 * v * sin * dx + 2.0 * v * cos * dy;
    let course_drift = c.a11 * state.beta + c.a12 * state.yaw_rate + state.yaw_rate;
    LieBundle {
        value: dx * dx + dy * dy - offset_sq,
        lf1: 2.0 * v * cos * dx + 2.0 * v * sin * dy,
        lf2: lateral * course_drift + 2.0 * v * v,
        lglf: lateral * c.b1,
    }
}

impl PointTarget {
    pub fn bundle(&self, state: &VehicleState, model: &LateralModel) -> LieBundle {
        lie_bundle(state, model, self.position, 0.0)
    }
}

impl ObstacleDisk {
    pub fn bundle(&self, state: &VehicleState, model: &LateralModel) -> LieBundle {
        lie_bundle(state, model, self.center, self.radius * self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowKind {
    Clf,
    Cbf,
    Box,
}

/// `a_u·u + a_s·δ ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintRow {
    pub a_u: f64,
    pub a_s: f64,
    pub b: f64,
    pub kind: RowKind,
    /// Obstacle index for barrier rows; bound index for box rows.
    pub tag: u32,
}

impl ConstraintRow {
    /// `a_u·u + a_s·δ - b`; feasible when `<= 0`.
    pub fn residual(&self, u: f64, slack: f64) -> f64 {
        self.a_u * u + self.a_s * slack - self.b
    }

    pub fn is_finite(&self) -> bool {
        self.a_u.is_finite() && self.a_s.is_finite() && self.b.is_finite()
    }

    /// `u <= bound` and `-u <= bound`.
    pub fn steering_box(bound: f64) -> [ConstraintRow; 2] {
        [
            ConstraintRow {
                a_u: 1.0,
                a_s: 0.0,
                b: bound,
                kind: RowKind::Box,
                tag: 0,
            },
            ConstraintRow {
                a_u: -1.0,
                a_s: 0.0,
                b: bound,
                kind: RowKind::Box,
                tag: 1,
            },
        ]
    }

    /// `-δ <= 0`.
    pub fn nonnegative_slack() -> ConstraintRow {
        ConstraintRow {
            a_u: 0.0,
            a_s: -1.0,
            b: 0.0,
            kind: RowKind::Box,
            tag: 2,
        }
    }
}

/// Lyapunov row: `lf2 + lglf·u + α1·lf1 + α2·V <= δ`.
pub fn clf_row(bundle: &LieBundle, gains: &GainSet) -> ConstraintRow {
    ConstraintRow {
        a_u: bundle.lglf,
        a_s: -1.0,
        b: -(bundle.lf2 + gains.alpha1 * bundle.lf1 + gains.alpha2 * bundle.value),
        kind: RowKind::Clf,
        tag: 0,
    }
}

/// Barrier row: `lf2 + lglf·u + α3·lf1 + α4·h >= 0`, negated into `<=` form.
pub fn cbf_row(bundle: &LieBundle, gains: &GainSet, obstacle: u32) -> ConstraintRow {
    ConstraintRow {
        a_u: -bundle.lglf,
        a_s: 0.0,
        b: bundle.lf2 + gains.alpha3 * bundle.lf1 + gains.alpha4 * bundle.value,
        kind: RowKind::Cbf,
        tag: obstacle,
    }
}
