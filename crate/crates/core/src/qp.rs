//! Exact solver for the two-variable steering QP
//!
//! ```text
//!     minimize    (u - u_ref)² + q·δ²
//!     subject to  a_u·u + a_s·δ <= b     for every row
//! ```
//!
//! The objective is strictly convex and the decision space is the plane, so
//! the optimum is pinned by at most two rows with independent normals. The
//! solver enumerates the unconstrained minimiser, every single-row projection
//! and every row pair, keeps the candidates that are primal and dual feasible,
//! and returns the cheapest one. With the handful of rows a steering step
//! produces this is both exact and fast.

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintRow, RowKind};

/// Primal tolerance on unit-normalised rows.
const PRIMAL_TOL: f64 = 1e-10;
/// Multiplier sign tolerance on unit-normalised rows.
const DUAL_TOL: f64 = 1e-10;
/// Pairs with `|det| <=` this (unit normals) are treated as parallel.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpProblem {
    pub u_ref: f64,
    pub q: f64,
    pub rows: Vec<ConstraintRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "OPTIMAL",
            QpStatus::Infeasible => "INFEASIBLE",
        }
    }
}

impl std::str::FromStr for QpStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OPTIMAL" => Ok(QpStatus::Optimal),
            "INFEASIBLE" => Ok(QpStatus::Infeasible),
            other => Err(format!("unknown QP status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    pub u_star: f64,
    /// Not sign-constrained unless the problem carries a `δ >= 0` row.
    pub slack_star: f64,
    pub status: QpStatus,
    /// Rows satisfied with equality at the optimum.
    pub active_set: Vec<usize>,
    /// One multiplier per problem row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
}

impl QpSolution {
    pub fn objective(&self, problem: &QpProblem) -> f64 {
        objective(problem, self.u_star, self.slack_star)
    }
}

/// Worst-case KKT violations of a solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    pub primal_infeasibility: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub dual_infeasibility: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal_infeasibility
            .max(self.stationarity)
            .max(self.complementarity)
            .max(self.dual_infeasibility)
    }
}

fn objective(p: &QpProblem, u: f64, s: f64) -> f64 {
    (u - p.u_ref) * (u - p.u_ref) + p.q * s * s
}

/// Unit-normal copy of a row; `scale` maps normalised multipliers back.
#[derive(Debug, Clone, Copy)]
struct UnitRow {
    nu: f64,
    ns: f64,
    c: f64,
    scale: f64,
}

#[derive(Debug, Clone)]
struct Candidate {
    u: f64,
    s: f64,
    obj: f64,
    /// (row index, normalised multiplier)
    lambdas: [(usize, f64); 2],
    n_active: usize,
}

struct Enumerator<'a> {
    problem: &'a QpProblem,
    rows: Vec<Option<UnitRow>>,
}

impl<'a> Enumerator<'a> {
    fn new(problem: &'a QpProblem) -> Option<Self> {
        let mut rows = Vec::with_capacity(problem.rows.len());
        for r in &problem.rows {
            let norm = r.a_u.hypot(r.a_s);
            if norm == 0.0 {
                // 0 <= b: either vacuous or impossible.
                if r.b < -PRIMAL_TOL {
                    return None;
                }
                rows.push(None);
            } else {
                rows.push(Some(UnitRow {
                    nu: r.a_u / norm,
                    ns: r.a_s / norm,
                    c: r.b / norm,
                    scale: norm,
                }));
            }
        }
        Some(Self { problem, rows })
    }

    fn feasible(&self, u: f64, s: f64) -> bool {
        self.rows
            .iter()
            .flatten()
            .all(|r| r.nu * u + r.ns * s - r.c <= PRIMAL_TOL)
    }

    fn unconstrained(&self) -> Candidate {
        let u = self.problem.u_ref;
        Candidate {
            u,
            s: 0.0,
            obj: 0.0,
            lambdas: [(0, 0.0); 2],
            n_active: 0,
        }
    }

    /// Minimiser on the boundary line of row `i` and its multiplier.
    fn single(&self, i: usize) -> Option<Candidate> {
        let r = self.rows[i]?;
        let (hu, hs) = (0.5, 0.5 / self.problem.q);
        let u0 = self.problem.u_ref;
        let violation = r.nu * u0 - r.c;
        let lambda = violation / (r.nu * r.nu * hu + r.ns * r.ns * hs);
        let u = u0 - lambda * hu * r.nu;
        let s = -lambda * hs * r.ns;
        Some(Candidate {
            u,
            s,
            obj: objective(self.problem, u, s),
            lambdas: [(i, lambda), (0, 0.0)],
            n_active: 1,
        })
    }

    /// Vertex of rows `i`, `j` and the multipliers that make it stationary.
    fn pair(&self, i: usize, j: usize) -> Option<Candidate> {
        let ri = self.rows[i]?;
        let rj = self.rows[j]?;
        let det = ri.nu * rj.ns - ri.ns * rj.nu;
        if det.abs() <= RANK_TOL {
            return None;
        }
        let u = (ri.c * rj.ns - ri.ns * rj.c) / det;
        let s = (ri.nu * rj.c - ri.c * rj.nu) / det;
        // Stationarity: grad f + li*ni + lj*nj = 0.
        let gu = -2.0 * (u - self.problem.u_ref);
        let gs = -2.0 * self.problem.q * s;
        let li = (gu * rj.ns - rj.nu * gs) / det;
        let lj = (ri.nu * gs - gu * ri.ns) / det;
        Some(Candidate {
            u,
            s,
            obj: objective(self.problem, u, s),
            lambdas: [(i, li), (j, lj)],
            n_active: 2,
        })
    }

    fn dual_feasible(c: &Candidate) -> bool {
        c.lambdas[..c.n_active].iter().all(|&(_, l)| l >= -DUAL_TOL)
    }

    fn candidates(&self) -> impl Iterator<Item = Candidate> + '_ {
        let m = self.rows.len();
        std::iter::once(self.unconstrained())
            .chain((0..m).filter_map(move |i| self.single(i)))
            .chain(
                (0..m)
                    .flat_map(move |i| (i + 1..m).map(move |j| (i, j)))
                    .filter_map(move |(i, j)| self.pair(i, j)),
            )
    }
}

fn better(best: &Option<Candidate>, c: &Candidate) -> bool {
    match best {
        None => true,
        Some(b) => c.obj < b.obj - 1e-12 * (1.0 + b.obj.abs()),
    }
}

/// Global optimum of `problem`, or `Infeasible` when the rows admit no point.
pub fn solve(problem: &QpProblem) -> QpSolution {
    assert!(problem.q > 0.0, "slack penalty must be positive");
    let Some(en) = Enumerator::new(problem) else {
        return infeasible(problem);
    };

    let mut best: Option<Candidate> = None;
    let mut best_feasible: Option<Candidate> = None;
    for c in en.candidates() {
        if !en.feasible(c.u, c.s) {
            continue;
        }
        if Enumerator::dual_feasible(&c) {
            if better(&best, &c) {
                best = Some(c);
            }
        } else if better(&best_feasible, &c) {
            best_feasible = Some(c);
        }
    }

    // A nonempty feasible set always contains one of the enumerated points,
    // so an empty `best` with a feasible fallback means rounding defeated the
    // multiplier test on a degenerate vertex.
    let Some(chosen) = best.or(best_feasible) else {
        return infeasible(problem);
    };

    let mut multipliers = vec![0.0; problem.rows.len()];
    for &(i, l) in &chosen.lambdas[..chosen.n_active] {
        let scale = en.rows[i].map_or(1.0, |r| r.scale);
        multipliers[i] = l.max(0.0) / scale;
    }
    let active_set = en
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let r = (*r)?;
            ((r.nu * chosen.u + r.ns * chosen.s - r.c).abs() <= 1e-9).then_some(i)
        })
        .collect();

    let mut sol = QpSolution {
        u_star: chosen.u,
        slack_star: chosen.s,
        status: QpStatus::Optimal,
        active_set,
        multipliers,
        kkt_residual: 0.0,
    };
    sol.kkt_residual = certify_kkt(problem, &sol).max();
    sol
}

fn infeasible(problem: &QpProblem) -> QpSolution {
    QpSolution {
        u_star: problem.u_ref,
        slack_star: 0.0,
        status: QpStatus::Infeasible,
        active_set: Vec::new(),
        multipliers: vec![0.0; problem.rows.len()],
        kkt_residual: f64::INFINITY,
    }
}

/// KKT residuals of `solution` on the original (unscaled) rows.
pub fn certify_kkt(problem: &QpProblem, solution: &QpSolution) -> KktReport {
    let (u, s) = (solution.u_star, solution.slack_star);
    let mut report = KktReport::default();
    let mut grad_u = 2.0 * (u - problem.u_ref);
    let mut grad_s = 2.0 * problem.q * s;
    for (row, &lambda) in problem.rows.iter().zip(&solution.multipliers) {
        let res = row.residual(u, s);
        report.primal_infeasibility = report.primal_infeasibility.max(res.max(0.0));
        report.complementarity = report.complementarity.max((lambda * res).abs());
        report.dual_infeasibility = report.dual_infeasibility.max((-lambda).max(0.0));
        grad_u += lambda * row.a_u;
        grad_s += lambda * row.a_s;
    }
    report.stationarity = grad_u.abs().max(grad_s.abs());
    report
}

/// Largest violation among barrier rows at the returned point.
pub fn max_cbf_violation(problem: &QpProblem, solution: &QpSolution) -> f64 {
    problem
        .rows
        .iter()
        .filter(|r| r.kind == RowKind::Cbf)
        .map(|r| r.residual(solution.u_star, solution.slack_star).max(0.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(a_u: f64, a_s: f64, b: f64, kind: RowKind) -> ConstraintRow {
        ConstraintRow {
            a_u,
            a_s,
            b,
            kind,
            tag: 0,
        }
    }

    #[test]
    fn no_rows_returns_reference() {
        let p = QpProblem {
            u_ref: 0.1,
            q: 100.0,
            rows: vec![],
        };
        let s = solve(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert_eq!((s.u_star, s.slack_star), (0.1, 0.0));
        assert!(s.active_set.is_empty());
    }

    #[test]
    fn symmetric_halfspace_projection() {
        let p = QpProblem {
            u_ref: 0.0,
            q: 1.0,
            rows: vec![row(1.0, -1.0, -1.0, RowKind::Clf)],
        };
        let s = solve(&p);
        assert!((s.u_star + 0.5).abs() < 1e-15);
        assert!((s.slack_star - 0.5).abs() < 1e-15);
        assert!((s.objective(&p) - 0.5).abs() < 1e-15);
        assert_eq!(s.active_set, vec![0]);
        let r = certify_kkt(&p, &s);
        assert!(r.max() <= 1e-12, "{r:?}");
    }

    #[test]
    fn perturbed_point_fails_stationarity() {
        let p = QpProblem {
            u_ref: 0.0,
            q: 1.0,
            rows: vec![row(1.0, -1.0, -1.0, RowKind::Clf)],
        };
        let mut s = solve(&p);
        s.u_star += 1e-3;
        assert!(certify_kkt(&p, &s).stationarity > 1e-4);
    }

    #[test]
    fn box_rows_clip_the_reference() {
        let mut rows = ConstraintRow::steering_box(0.5).to_vec();
        rows.insert(0, row(1.0, 0.0, 2.0, RowKind::Cbf));
        let p = QpProblem {
            u_ref: 0.9,
            q: 10.0,
            rows,
        };
        let s = solve(&p);
        assert_eq!(s.u_star, 0.5);
        assert_eq!(s.active_set, vec![1]);
        assert!(s.multipliers[1] > 0.0);
    }

    #[test]
    fn vertex_with_two_active_rows() {
        // u >= 1 (barrier), u <= 1 + δ ... pushes to a vertex with slack.
        let p = QpProblem {
            u_ref: 0.0,
            q: 4.0,
            rows: vec![
                row(-1.0, 0.0, -1.0, RowKind::Cbf),
                row(1.0, 1.0, 0.5, RowKind::Clf),
            ],
        };
        let s = solve(&p);
        assert!((s.u_star - 1.0).abs() < 1e-12);
        assert!((s.slack_star + 0.5).abs() < 1e-12);
        assert_eq!(s.active_set, vec![0, 1]);
        assert!(s.kkt_residual <= 1e-12);
    }

    #[test]
    fn conflicting_barriers_are_infeasible() {
        let p = QpProblem {
            u_ref: 0.0,
            q: 1.0,
            rows: vec![
                row(1.0, 0.0, -1.0, RowKind::Cbf),
                row(-1.0, 0.0, -1.0, RowKind::Cbf),
            ],
        };
        assert_eq!(solve(&p).status, QpStatus::Infeasible);
    }

    #[test]
    fn zero_authority_row() {
        let vacuous = QpProblem {
            u_ref: 0.2,
            q: 1.0,
            rows: vec![row(0.0, 0.0, 3.0, RowKind::Cbf)],
        };
        let s = solve(&vacuous);
        assert_eq!(s.status, QpStatus::Optimal);
        assert_eq!(s.u_star, 0.2);

        let doomed = QpProblem {
            rows: vec![row(0.0, 0.0, -3.0, RowKind::Cbf)],
            ..vacuous
        };
        assert_eq!(solve(&doomed).status, QpStatus::Infeasible);
    }

    #[test]
    fn parallel_rows_are_skipped_not_divided() {
        let p = QpProblem {
            u_ref: 0.0,
            q: 1.0,
            rows: vec![
                row(1.0, -1.0, -1.0, RowKind::Clf),
                row(2.0, -2.0, -2.0, RowKind::Cbf),
            ],
        };
        let s = solve(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.u_star + 0.5).abs() < 1e-14);
        assert!(s.kkt_residual < 1e-12);
    }

    #[test]
    fn degenerate_three_rows_through_vertex() {
        let p = QpProblem {
            u_ref: 2.0,
            q: 1.0,
            rows: vec![
                row(1.0, 0.0, 1.0, RowKind::Box),
                row(1.0, 1.0, 1.0, RowKind::Cbf),
                row(1.0, -1.0, 1.0, RowKind::Clf),
            ],
        };
        let s = solve(&p);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.u_star - 1.0).abs() < 1e-14 && s.slack_star.abs() < 1e-14);
        assert_eq!(s.active_set, vec![0, 1, 2]);
        assert!(s.kkt_residual < 1e-12);
    }

    #[test]
    fn status_strings() {
        for s in [QpStatus::Optimal, QpStatus::Infeasible] {
            assert_eq!(s.as_str().parse::<QpStatus>().unwrap(), s);
        }
    }
}
