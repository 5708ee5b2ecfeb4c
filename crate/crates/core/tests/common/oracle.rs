//! Independent reference implementations used by the integration tests and
//! the acceptance runner. Nothing in here calls the crate's own integrator,
//! derivative chain or solver.

#![allow(dead_code)]

use lanesafe_core::{ConstraintRow, Point, QpProblem, VehicleParams};
use rand::Rng;

/// Plain-formula dynamics, written out separately from the library.
#[derive(Clone, Copy)]
pub struct RefDynamics {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub v: f64,
    pub iz: f64,
}

impl RefDynamics {
    pub fn new(p: &VehicleParams) -> Self {
        let (m, iz, cf, cr, lf, lr, v) = (
            p.mass,
            p.yaw_inertia,
            p.cornering_front,
            p.cornering_rear,
            p.lf,
            p.lr,
            p.speed,
        );
        Self {
            a: [
                [
                    -(cf + cr) / (m * v),
                    (cr * lr - cf * lf) / (m * v * v) - 1.0,
                ],
                [
                    (cr * lr - cf * lf) / iz,
                    -(cf * lf * lf + cr * lr * lr) / (iz * v),
                ],
            ],
            b: [cf / (m * v), cf * lf / iz],
            v,
            iz,
        }
    }

    pub fn f(&self, s: [f64; 5], delta: f64, mz: f64) -> [f64; 5] {
        let [beta, r, _, _, psi] = s;
        [
            self.a[0][0] * beta + self.a[0][1] * r + self.b[0] * delta,
            self.a[1][0] * beta + self.a[1][1] * r + self.b[1] * delta + mz / self.iz,
            self.v * (beta + psi).cos(),
            self.v * (beta + psi).sin(),
            r,
        ]
    }

    /// `n` RK4 steps of size `h` (negative `h` integrates backwards).
    pub fn flow(&self, mut s: [f64; 5], delta: f64, h: f64, n: usize) -> [f64; 5] {
        let add = |s: [f64; 5], k: [f64; 5], c: f64| -> [f64; 5] {
            std::array::from_fn(|i| s[i] + c * k[i])
        };
        for _ in 0..n {
            let k1 = self.f(s, delta, 0.0);
            let k2 = self.f(add(s, k1, h / 2.0), delta, 0.0);
            let k3 = self.f(add(s, k2, h / 2.0), delta, 0.0);
            let k4 = self.f(add(s, k3, h), delta, 0.0);
            s = std::array::from_fn(|i| {
                s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            });
        }
        s
    }
}

pub fn sq_dist(s: [f64; 5], c: Point, k: f64) -> f64 {
    (s[2] - c.x).powi(2) + (s[3] - c.y).powi(2) - k
}

/// First and second time derivatives of the squared distance along the flow
/// under a held steering angle, by central differences.
pub fn fd_derivatives(dynamics: &RefDynamics, s: [f64; 5], c: Point, delta: f64) -> (f64, f64) {
    let h = 1e-4;
    let sub = 4;
    let fwd = dynamics.flow(s, delta, h / sub as f64, sub);
    let back = dynamics.flow(s, delta, -h / sub as f64, sub);
    // a² - b² = (a - b)(a + b) keeps the increments free of cancellation.
    let inc = |e: [f64; 5]| {
        (e[2] - s[2]) * (e[2] + s[2] - 2.0 * c.x) + (e[3] - s[3]) * (e[3] + s[3] - 2.0 * c.y)
    };
    let (up, down) = (inc(fwd), inc(back));
    ((up - down) / (2.0 * h), (up + down) / (h * h))
}

/// Objective of the steering QP.
pub fn objective(p: &QpProblem, u: f64, s: f64) -> f64 {
    (u - p.u_ref).powi(2) + p.q * s * s
}

/// Smallest slack magnitude admissible at fixed `u`, limited to `[-2, 2]`.
fn best_slack(rows: &[ConstraintRow], u: f64, tol: f64) -> Option<f64> {
    let (mut lo, mut hi) = (-2.0_f64, 2.0_f64);
    for r in rows {
        let rhs = r.b - r.a_u * u;
        if r.a_s > 0.0 {
            hi = hi.min(rhs / r.a_s);
        } else if r.a_s < 0.0 {
            lo = lo.max(rhs / r.a_s);
        } else if rhs < -tol {
            return None;
        }
    }
    if lo > hi + tol {
        return None;
    }
    Some(0.0_f64.clamp(lo, hi.max(lo)))
}

/// Dense search over `u ∈ [-2, 2]` at `step`, slack minimised exactly for
/// every grid `u`, then golden-section refinement around the best cell.
/// Returns `None` when no grid point is feasible.
pub fn grid_oracle(p: &QpProblem, step: f64) -> Option<(f64, f64, f64)> {
    let n = (4.0 / step).round() as usize;
    let eval = |u: f64| best_slack(&p.rows, u, 1e-12).map(|s| (objective(p, u, s), s));
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..=n {
        let u = -2.0 + i as f64 * step;
        if let Some((f, s)) = eval(u) {
            if best.map_or(true, |b| f < b.2) {
                best = Some((u, s, f));
            }
        }
    }
    let (u0, _, _) = best?;
    let (mut a, mut b) = ((u0 - step).max(-2.0), (u0 + step).min(2.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    // The minimum often sits on a feasibility edge, so keep the best
    // feasible probe rather than trusting the final bracket.
    let mut probe = |u: f64| match eval(u) {
        Some((f, s)) => {
            if best.map_or(true, |b| f < b.2) {
                best = Some((u, s, f));
            }
            f
        }
        None => f64::INFINITY,
    };
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if probe(c) < probe(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best
}

/// Random QP shaped like the controller's: one Lyapunov row, up to three
/// barrier rows, a steering box and sometimes the slack sign row. Rows are
/// built around a random point in `[-1, 1]²` so the instance is feasible.
pub fn random_feasible_qp<R: Rng>(rng: &mut R) -> QpProblem {
    let u0: f64 = rng.gen_range(-1.0..1.0);
    let s0: f64 = rng.gen_range(-1.0..1.0);
    let bound = (u0.abs() + 0.01).max(rng.gen_range(0.1..1.5));
    let mut rows = Vec::new();
    let scale = 10f64.powf(rng.gen_range(-1.0..2.0));
    let a_u = scale * rng.gen_range(-1.0..1.0);
    rows.push(ConstraintRow {
        a_u,
        a_s: -1.0,
        b: a_u * u0 - s0 + rng.gen_range(0.0..0.5) * rng.gen_range(0.0..1.0f64).powi(3),
        kind: lanesafe_core::RowKind::Clf,
        tag: 0,
    });
    for tag in 0..rng.gen_range(0..=3) {
        let scale = 10f64.powf(rng.gen_range(-1.0..2.0));
        let a_u = scale * rng.gen_range(-1.0..1.0);
        rows.push(ConstraintRow {
            a_u,
            a_s: 0.0,
            b: a_u * u0 + a_u.abs() * rng.gen_range(0.002..0.3),
            kind: lanesafe_core::RowKind::Cbf,
            tag,
        });
    }
    rows.extend(ConstraintRow::steering_box(bound));
    if s0 >= 0.0 && rng.gen_bool(0.3) {
        rows.push(ConstraintRow::nonnegative_slack());
    }
    QpProblem {
        u_ref: rng.gen_range(-1.5..1.5),
        q: 10f64.powf(rng.gen_range(-1.0..2.5)),
        rows,
    }
}

/// Two barrier rows that cannot both hold inside the steering box.
pub fn random_infeasible_qp<R: Rng>(rng: &mut R) -> QpProblem {
    let bound = rng.gen_range(0.2..1.0);
    let gap = rng.gen_range(0.05..0.5);
    let k1 = rng.gen_range(0.5..20.0);
    let k2 = rng.gen_range(0.5..20.0);
    // u >= c + gap and u <= c, written as barrier rows.
    let c: f64 = rng.gen_range(-bound..bound - gap);
    let mut rows = vec![
        ConstraintRow {
            a_u: -k1,
            a_s: 0.0,
            b: -k1 * (c + gap),
            kind: lanesafe_core::RowKind::Cbf,
            tag: 0,
        },
        ConstraintRow {
            a_u: k2,
            a_s: 0.0,
            b: k2 * c,
            kind: lanesafe_core::RowKind::Cbf,
            tag: 1,
        },
    ];
    rows.extend(ConstraintRow::steering_box(bound));
    QpProblem {
        u_ref: rng.gen_range(-1.0..1.0),
        q: 100.0,
        rows,
    }
}

/// Nearest point on a densely resampled polyline, spacing at most `ds`.
/// Returns `(arc length, distance)` of the first minimum.
pub fn sampled_projection(waypoints: &[Point], p: Point, ds: f64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut s0 = 0.0;
    for w in waypoints.windows(2) {
        let len = w[0].distance(w[1]);
        let n = (len / ds).ceil().max(1.0) as usize;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let q = Point::new(
                w[0].x + t * (w[1].x - w[0].x),
                w[0].y + t * (w[1].y - w[0].y),
            );
            let d = q.distance(p);
            if d < best.1 {
                best = (s0 + t * len, d);
            }
        }
        s0 += len;
    }
    best
}

/// Point at arc length `s` by walking the polyline.
pub fn walk(waypoints: &[Point], s: f64) -> Point {
    let mut left = s.max(0.0);
    for w in waypoints.windows(2) {
        let len = w[0].distance(w[1]);
        if left <= len {
            let t = left / len;
            return Point::new(
                w[0].x + t * (w[1].x - w[0].x),
                w[0].y + t * (w[1].y - w[0].y),
            );
        }
        left -= len;
    }
    *waypoints.last().unwrap()
}

/// Random state with the vehicle away from the centre point.
pub fn random_state<R: Rng>(rng: &mut R) -> ([f64; 5], Point) {
    let s = [
        rng.gen_range(-0.2..0.2),
        rng.gen_range(-0.8..0.8),
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    ];
    let c = loop {
        let c = Point::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        if (s[2] - c.x).hypot(s[3] - c.y) > 1.0 {
            break c;
        }
    };
    (s, c)
}
