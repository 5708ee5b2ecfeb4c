//! Reference paths, moving obstacles and the built-in scenario catalogue.
//!
//! Scenario geometry is synthetic. Each builder documents its coordinates;
//! every value can be overridden by editing the emitted JSON config.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraints::{GainSet, PointTarget};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::vehicle::{VehicleParams, VehicleState};

/// Polyline with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    waypoints: Vec<Point>,
    arc: Vec<f64>,
}

/// Nearest point of a path to a query position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub arc_length: f64,
    pub point: Point,
    pub distance: f64,
}

impl ReferencePath {
    pub fn new(waypoints: Vec<Point>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        if let Some(i) = waypoints.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidPath(format!("waypoint {i} is not finite")));
        }
        let mut arc = Vec::with_capacity(waypoints.len());
        arc.push(0.0);
        for (i, w) in waypoints.windows(2).enumerate() {
            let len = w[0].distance(w[1]);
            if len <= 0.0 {
                return Err(Error::InvalidPath(format!(
                    "waypoints {i} and {} coincide",
                    i + 1
                )));
            }
            arc.push(arc[i] + len);
        }
        Ok(Self { waypoints, arc })
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Nearest point on the polyline; ties go to the smaller arc length.
    pub fn project(&self, p: Point) -> Projection {
        let mut best = Projection {
            arc_length: 0.0,
            point: self.waypoints[0],
            distance: f64::INFINITY,
        };
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len2 = ex * ex + ey * ey;
            let s = (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0);
            let foot = a.lerp(b, s);
            let d = p.distance(foot);
            if d < best.distance {
                best = Projection {
                    arc_length: self.arc[i] + s * (self.arc[i + 1] - self.arc[i]),
                    point: foot,
                    distance: d,
                };
            }
        }
        best
    }

    /// Point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Point {
        if s <= 0.0 {
            return self.waypoints[0];
        }
        if s >= self.length() {
            return *self.waypoints.last().unwrap();
        }
        // First index with arc > s; s lies in segment [i-1, i].
        let i = self.arc.partition_point(|&a| a <= s);
        let (a0, a1) = (self.arc[i - 1], self.arc[i]);
        self.waypoints[i - 1].lerp(self.waypoints[i], (s - a0) / (a1 - a0))
    }

    /// Path point `lookahead` ahead of the projection of `position`.
    pub fn target_point(&self, position: Point, lookahead: f64) -> PointTarget {
        let s = self.project(position).arc_length;
        PointTarget {
            position: self.point_at(s + lookahead),
        }
    }

    pub fn lateral_error(&self, position: Point) -> f64 {
        self.project(position).distance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Knot {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Knot {
    pub const fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }
}

/// Obstacle moving along a piecewise-linear, time-parameterised track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingObstacle {
    pub label: String,
    /// Physical radius (m), before inflation by the vehicle footprint.
    pub radius: f64,
    pub knots: Vec<Knot>,
}

impl MovingObstacle {
    pub fn fixed(label: &str, radius: f64, at: Point) -> Self {
        Self {
            label: label.to_owned(),
            radius,
            knots: vec![Knot::new(0.0, at.x, at.y)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidObstacle(format!(
                "`{}`: radius must be > 0, got {}",
                self.label, self.radius
            )));
        }
        if self.knots.is_empty() {
            return Err(Error::InvalidObstacle(format!(
                "`{}`: no knots",
                self.label
            )));
        }
        if self
            .knots
            .iter()
            .any(|k| !(k.t.is_finite() && k.x.is_finite() && k.y.is_finite()))
        {
            return Err(Error::InvalidObstacle(format!(
                "`{}`: non-finite knot",
                self.label
            )));
        }
        if self.knots.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidObstacle(format!(
                "`{}`: knot times must be strictly increasing",
                self.label
            )));
        }
        Ok(())
    }

    /// Linear interpolation between knots, held constant outside them.
    pub fn position(&self, t: f64) -> Point {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if t <= first.t {
            return Point::new(first.x, first.y);
        }
        if t >= last.t {
            return Point::new(last.x, last.y);
        }
        let i = self.knots.partition_point(|k| k.t <= t);
        let (k0, k1) = (self.knots[i - 1], self.knots[i]);
        let s = (t - k0.t) / (k1.t - k0.t);
        Point::new(k0.x, k0.y).lerp(Point::new(k1.x, k1.y), s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// Follow a polyline through a moving lookahead target.
    PathTracking { waypoints: Vec<Point> },
    /// Drive to a fixed goal.
    PointTracking { goal: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub params: VehicleParams,
    pub gains: GainSet,
    pub initial_state: VehicleState,
    pub reference: Reference,
    pub obstacles: Vec<MovingObstacle>,
    /// Simulated time (s).
    pub duration: f64,
    /// Control and integration step (s).
    pub dt: f64,
    /// Lookahead distance for path tracking (m).
    pub lookahead: f64,
    /// Extra clearance added to every obstacle radius (m).
    pub margin: f64,
    /// Symmetric front steering limit (rad).
    pub steering_bound: f64,
    /// Constrain the Lyapunov slack to be nonnegative.
    #[serde(default)]
    pub nonnegative_slack: bool,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gains.validate()?;
        if !self.initial_state.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        let positive = [
            ("duration", self.duration),
            ("dt", self.dt),
            ("lookahead", self.lookahead),
            ("steering_bound", self.steering_bound),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "margin must be >= 0, got {}",
                self.margin
            )));
        }
        match &self.reference {
            Reference::PathTracking { waypoints } => {
                ReferencePath::new(waypoints.clone())?;
            }
            Reference::PointTracking { goal } => {
                if !goal.is_finite() {
                    return Err(Error::NonFinite("goal"));
                }
            }
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    /// Radius of the danger zone around obstacle `i`.
    pub fn effective_radius(&self, i: usize) -> f64 {
        self.obstacles[i].radius + self.params.half_width + self.margin
    }

    /// Number of records a full-length run produces.
    pub fn step_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    LaneChange,
    StaticOne,
    PointMulti,
    DynamicOne,
    Fars210,
    Fars220,
    Fars310,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        ScenarioId::LaneChange,
        ScenarioId::StaticOne,
        ScenarioId::PointMulti,
        ScenarioId::DynamicOne,
        ScenarioId::Fars210,
        ScenarioId::Fars220,
        ScenarioId::Fars310,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::LaneChange => "lane_change",
            ScenarioId::StaticOne => "static_one",
            ScenarioId::PointMulti => "point_multi",
            ScenarioId::DynamicOne => "dynamic_one",
            ScenarioId::Fars210 => "fars210",
            ScenarioId::Fars220 => "fars220",
            ScenarioId::Fars310 => "fars310",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| Error::UnknownScenario(s.to_owned()))
    }
}

const LANE_WIDTH: f64 = 3.5;
const SAMPLE_SPACING: f64 = 0.5;
const BICYCLE_RADIUS: f64 = 0.6;

fn sample_x(x0: f64, x1: f64, y: impl Fn(f64) -> f64) -> Vec<Point> {
    let n = ((x1 - x0) / SAMPLE_SPACING).round() as usize;
    (0..=n)
        .map(|i| {
            let x = x0 + i as f64 * SAMPLE_SPACING;
            Point::new(x, y(x))
        })
        .collect()
}

/// Lateral offset of the single lane change: `LANE_WIDTH` blended in with
/// `3s² - 2s³` between `start` and `start + 40` m.
fn lane_change_offset(x: f64, start: f64) -> f64 {
    let s = ((x - start) / 40.0).clamp(0.0, 1.0);
    LANE_WIDTH * s * s * (3.0 - 2.0 * s)
}

fn lane_change_path() -> Vec<Point> {
    sample_x(0.0, 140.0, |x| lane_change_offset(x, 20.0))
}

fn straight_path(length: f64) -> Vec<Point> {
    sample_x(0.0, length, |_| 0.0)
}

/// Drive east to `turn_x`, then a left quarter turn of radius `radius` and
/// north from there.
fn left_turn_path(turn_x: f64, radius: f64, north: f64) -> Vec<Point> {
    let mut pts = sample_x(0.0, turn_x, |_| 0.0);
    let n_arc = (radius * FRAC_PI_2 / SAMPLE_SPACING).round() as usize;
    for i in 1..=n_arc {
        let th = FRAC_PI_2 * i as f64 / n_arc as f64;
        pts.push(Point::new(
            turn_x + radius * th.sin(),
            radius * (1.0 - th.cos()),
        ));
    }
    let n_up = (north / SAMPLE_SPACING).round() as usize;
    for i in 1..=n_up {
        pts.push(Point::new(
            turn_x + radius,
            radius + i as f64 * SAMPLE_SPACING,
        ));
    }
    pts
}

fn base(name: &str, reference: Reference, duration: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_owned(),
        params: VehicleParams::default(),
        gains: GainSet::default(),
        initial_state: VehicleState::default(),
        reference,
        obstacles: Vec::new(),
        duration,
        dt: 0.01,
        lookahead: 2.5,
        margin: 0.3,
        steering_bound: 0.5,
        nonnegative_slack: false,
    }
}

/// Built-in scenario for `id`.
pub fn build_scenario(id: ScenarioId) -> ScenarioConfig {
    let path = |waypoints| Reference::PathTracking { waypoints };
    match id {
        // 20 m lead-in, 3.5 m lane change over 40 m, long lead-out.
        ScenarioId::LaneChange => base(id.as_str(), path(lane_change_path()), 10.0),

        // Same path; a stopped cyclist 0.6 m left of the centreline midway
        // through the lane change.
        ScenarioId::StaticOne => {
            let mut c = base(id.as_str(), path(lane_change_path()), 12.0);
            let x = 40.0;
            c.obstacles.push(MovingObstacle::fixed(
                "stopped bicyclist",
                BICYCLE_RADIUS,
                Point::new(x, lane_change_offset(x, 20.0) + 0.6),
            ));
            c
        }

        // Goal 80 m east, 12 m north; three static disks in between.
        ScenarioId::PointMulti => {
            let mut c = base(
                id.as_str(),
                Reference::PointTracking {
                    goal: Point::new(80.0, 12.0),
                },
                15.0,
            );
            c.obstacles = vec![
                MovingObstacle::fixed("obstacle 1", 1.0, Point::new(20.0, 2.5)),
                MovingObstacle::fixed("obstacle 2", 1.2, Point::new(42.0, 6.5)),
                MovingObstacle::fixed("obstacle 3", 1.0, Point::new(62.0, 9.5)),
            ];
            c
        }

        // Straight lane; a 2 m disk crosses from the right at 3 m/s and
        // reaches the centreline 1.5 s before the vehicle would.
        ScenarioId::DynamicOne => {
            let mut c = base(id.as_str(), path(straight_path(160.0)), 12.0);
            c.obstacles.push(MovingObstacle {
                label: "crossing obstacle".to_owned(),
                radius: 2.0,
                knots: vec![Knot::new(0.0, 40.0, -7.5), Knot::new(6.0, 40.0, 10.5)],
            });
            c
        }

        // Ego turns left across the oncoming lane (y = 3.5, westbound) while
        // a cyclist rides straight through the conflict point.
        ScenarioId::Fars210 => {
            let mut c = base(id.as_str(), path(left_turn_path(30.0, 15.0, 60.0)), 10.0);
            c.obstacles.push(MovingObstacle {
                label: "bicyclist".to_owned(),
                radius: BICYCLE_RADIUS,
                knots: vec![
                    Knot::new(0.0, 60.0, LANE_WIDTH),
                    Knot::new(12.0, 0.0, LANE_WIDTH),
                ],
            });
            c
        }

        // Ego drives straight; a 2 m/s cyclist in the bike lane at y = -2.5
        // merges into the ego lane centreline just ahead of the vehicle.
        ScenarioId::Fars220 => {
            let mut c = base(id.as_str(), path(straight_path(200.0)), 14.0);
            c.obstacles.push(MovingObstacle {
                label: "bicyclist".to_owned(),
                radius: BICYCLE_RADIUS,
                knots: vec![
                    Knot::new(0.0, 20.0, -2.5),
                    Knot::new(2.0, 24.0, -2.5),
                    Knot::new(4.0, 28.0, 0.0),
                    Knot::new(30.0, 80.0, 0.0),
                ],
            });
            c
        }

        // Ego drives straight; a cyclist waits at the kerb (y = -6) and then
        // rides across the lane at 2 m/s at mid-block.
        ScenarioId::Fars310 => {
            let mut c = base(id.as_str(), path(straight_path(160.0)), 10.0);
            c.obstacles.push(MovingObstacle {
                label: "bicyclist".to_owned(),
                radius: BICYCLE_RADIUS,
                knots: vec![
                    Knot::new(0.0, 50.0, -6.0),
                    Knot::new(2.5, 50.0, -6.0),
                    Knot::new(10.5, 50.0, 10.0),
                ],
            });
            c
        }
    }
}
