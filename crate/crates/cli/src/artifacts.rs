//! Trajectory CSV, metrics JSON and the SVG sketch.

use std::fmt::Write as _;
use std::io::{Read, Write};

use lanesafe_core::{
    Metrics, ObstacleDisk, Point, QpStatus, Reference, ScenarioConfig, StepRecord, TrajectoryLog,
    VehicleState,
};

use crate::CliError;

pub const CSV_HEADER: [&str; 14] = [
    "t",
    "x",
    "y",
    "psi",
    "beta",
    "r",
    "delta_f",
    "slack",
    "qp_status",
    "min_h",
    "min_clearance",
    "lateral_error",
    "goal_x",
    "goal_y",
];

/// 17 significant digits, enough for an exact round trip.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(log: &TrajectoryLog, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &log.records {
        let s = &r.state;
        w.write_record([
            num(r.t),
            num(s.x),
            num(s.y),
            num(s.psi),
            num(s.beta),
            num(s.yaw_rate),
            num(r.delta_f),
            num(r.slack),
            r.status.as_str().to_owned(),
            num(r.min_h),
            num(r.min_clearance()),
            num(r.lateral_error),
            num(r.goal.x),
            num(r.goal.y),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a log from a trajectory CSV. Per-obstacle clearances are not
/// stored in the file and are recomputed from `config`.
pub fn read_csv<R: Read>(config: &ScenarioConfig, input: R) -> Result<TrajectoryLog, CliError> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(CSV_HEADER) {
        return Err(CliError::Format("unexpected trajectory CSV header".into()));
    }
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| -> Result<f64, CliError> {
            row[i].parse().map_err(|_| {
                CliError::Format(format!(
                    "bad number `{}` in column {}",
                    &row[i], CSV_HEADER[i]
                ))
            })
        };
        let state = VehicleState {
            beta: f(4)?,
            yaw_rate: f(5)?,
            x: f(1)?,
            y: f(2)?,
            psi: f(3)?,
        };
        let t = f(0)?;
        let status: QpStatus = row[8]
            .parse()
            .map_err(|_| CliError::Format(format!("bad qp_status `{}`", &row[8])))?;
        let clearances = (0..config.obstacles.len())
            .map(|i| {
                ObstacleDisk {
                    center: config.obstacles[i].position(t),
                    radius: config.effective_radius(i),
                }
                .clearance(state.position())
            })
            .collect();
        records.push(StepRecord {
            t,
            state,
            delta_f: f(6)?,
            slack: f(7)?,
            status,
            clearances,
            min_h: f(9)?,
            lateral_error: f(11)?,
            goal: Point::new(f(12)?, f(13)?),
        });
    }
    Ok(TrajectoryLog {
        config: config.clone(),
        records,
    })
}

pub fn metrics_json(m: &Metrics) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("metrics serialise");
    s.push('\n');
    s
}

struct Frame {
    min: Point,
    max: Point,
    scale: f64,
}

impl Frame {
    const WIDTH: f64 = 900.0;
    const PAD: f64 = 20.0;

    fn px(&self, p: Point) -> (f64, f64) {
        (
            Self::PAD + (p.x - self.min.x) * self.scale,
            Self::PAD + (self.max.y - p.y) * self.scale,
        )
    }

    fn height(&self) -> f64 {
        2.0 * Self::PAD + (self.max.y - self.min.y) * self.scale
    }
}

fn polyline(frame: &Frame, pts: impl Iterator<Item = Point>, style: &str) -> String {
    let mut d = String::new();
    for p in pts {
        let (x, y) = frame.px(p);
        let _ = write!(d, "{x:.2},{y:.2} ");
    }
    format!(
        "<polyline fill=\"none\" {style} points=\"{}\"/>\n",
        d.trim_end()
    )
}

/// Reference, driven trace, obstacles at five instants and the goal.
pub fn svg(log: &TrajectoryLog) -> String {
    let c = &log.config;
    let trace: Vec<Point> = log.records.iter().map(|r| r.state.position()).collect();
    let end_t = log.records.last().map_or(0.0, |r| r.t);
    let snapshots: Vec<f64> = (0..5).map(|i| end_t * i as f64 / 4.0).collect();

    let mut pts = trace.clone();
    let (reference, goal) = match &c.reference {
        Reference::PathTracking { waypoints } => (waypoints.clone(), None),
        Reference::PointTracking { goal } => (vec![c.initial_state.position(), *goal], Some(*goal)),
    };
    pts.extend(&reference);
    for (i, o) in c.obstacles.iter().enumerate() {
        let r = c.effective_radius(i);
        for &t in &snapshots {
            let p = o.position(t);
            pts.push(Point::new(p.x - r, p.y - r));
            pts.push(Point::new(p.x + r, p.y + r));
        }
    }
    let min = pts
        .iter()
        .fold(Point::new(f64::INFINITY, f64::INFINITY), |a, p| {
            Point::new(a.x.min(p.x), a.y.min(p.y))
        });
    let max = pts
        .iter()
        .fold(Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
            Point::new(a.x.max(p.x), a.y.max(p.y))
        });
    let span = (max.x - min.x).max(max.y - min.y).max(1.0);
    let frame = Frame {
        min,
        max,
        scale: (Frame::WIDTH - 2.0 * Frame::PAD) / span,
    };

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n<title>{}</title>\n",
        Frame::WIDTH,
        frame.height(),
        c.name
    );
    s += &polyline(
        &frame,
        reference.iter().copied(),
        "stroke=\"#999\" stroke-dasharray=\"6 4\"",
    );
    for (i, o) in c.obstacles.iter().enumerate() {
        let r = c.effective_radius(i) * frame.scale;
        for (k, &t) in snapshots.iter().enumerate() {
            let (x, y) = frame.px(o.position(t));
            let alpha = 0.15 + 0.15 * k as f64;
            let _ = writeln!(
                s,
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.2}\" fill=\"#d33\" fill-opacity=\"{alpha:.2}\"/>"
            );
        }
    }
    s += &polyline(
        &frame,
        trace.into_iter(),
        "stroke=\"#1f5fbf\" stroke-width=\"2\"",
    );
    if let Some(g) = goal {
        let (x, y) = frame.px(g);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"#2a2\"/>"
        );
    }
    s += "</svg>\n";
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use lanesafe_core::{build_scenario, compute_metrics, run, ScenarioId};

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 123456.789, f64::INFINITY, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(num(10.0), "1.0000000000000000e1");
    }

    #[test]
    fn csv_round_trip_preserves_metrics() {
        let mut c = build_scenario(ScenarioId::Fars310);
        c.duration = 3.0;
        let log = run(&c).unwrap();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let back = read_csv(&c, buf.as_slice()).unwrap();
        assert_eq!(back, log);
        assert_eq!(compute_metrics(&back), compute_metrics(&log));
    }

    #[test]
    fn header_is_checked() {
        let c = build_scenario(ScenarioId::LaneChange);
        assert!(read_csv(&c, "a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn svg_has_one_circle_per_snapshot() {
        let mut c = build_scenario(ScenarioId::PointMulti);
        c.duration = 1.0;
        let doc = svg(&run(&c).unwrap());
        assert!(doc.starts_with("<svg"));
        assert_eq!(doc.matches("<circle").count(), 3 * 5 + 1);
        assert_eq!(doc.matches("<polyline").count(), 2);
    }
}
