//! One JSON line per solved QP, and a replayer that re-solves them.

use std::io::{BufRead, Write};

use lanesafe_core::{solve, QpProblem, QpSolution, QpStatus};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpEntry {
    pub step: usize,
    pub problem: QpProblem,
    pub u_star: f64,
    pub slack_star: f64,
    pub status: QpStatus,
    pub active_set: Vec<usize>,
    pub multipliers: Vec<f64>,
    /// `None` for infeasible problems.
    pub kkt_residual: Option<f64>,
}

impl DumpEntry {
    pub fn new(step: usize, problem: &QpProblem, s: &QpSolution) -> Self {
        Self {
            step,
            problem: problem.clone(),
            u_star: s.u_star,
            slack_star: s.slack_star,
            status: s.status,
            active_set: s.active_set.clone(),
            multipliers: s.multipliers.clone(),
            kkt_residual: s.kkt_residual.is_finite().then_some(s.kkt_residual),
        }
    }

    fn matches(&self, s: &QpSolution) -> bool {
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.status == s.status
            && same(self.u_star, s.u_star)
            && same(self.slack_star, s.slack_star)
            && self.active_set == s.active_set
            && self.multipliers.len() == s.multipliers.len()
            && self
                .multipliers
                .iter()
                .zip(&s.multipliers)
                .all(|(a, b)| same(*a, *b))
    }
}

pub fn write_entry<W: Write>(out: &mut W, entry: &DumpEntry) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, entry).map_err(|e| CliError::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub total: usize,
    /// Steps whose fresh solution differs from the recorded one.
    pub mismatched: Vec<usize>,
}

pub fn replay<R: BufRead>(input: R) -> Result<ReplaySummary, CliError> {
    let mut summary = ReplaySummary::default();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: DumpEntry = serde_json::from_str(&line)
            .map_err(|e| CliError::Format(format!("line {}: {e}", n + 1)))?;
        summary.total += 1;
        if !entry.matches(&solve(&entry.problem)) {
            summary.mismatched.push(entry.step);
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lanesafe_core::{ConstraintRow, RowKind};

    fn problem() -> QpProblem {
        let mut rows = vec![ConstraintRow {
            a_u: 2.0,
            a_s: -1.0,
            b: -1.0,
            kind: RowKind::Clf,
            tag: 0,
        }];
        rows.extend(ConstraintRow::steering_box(0.5));
        QpProblem {
            u_ref: 0.0,
            q: 100.0,
            rows,
        }
    }

    #[test]
    fn replay_accepts_own_dump_and_flags_tampering() {
        let p = problem();
        let mut buf = Vec::new();
        let mut e = DumpEntry::new(0, &p, &solve(&p));
        write_entry(&mut buf, &e).unwrap();
        e.step = 1;
        e.u_star += 1e-9;
        write_entry(&mut buf, &e).unwrap();
        let s = replay(buf.as_slice()).unwrap();
        assert_eq!(s.total, 2);
        assert_eq!(s.mismatched, vec![1]);
    }

    #[test]
    fn infeasible_residual_is_null() {
        let mut p = problem();
        p.rows.push(ConstraintRow {
            a_u: 0.0,
            a_s: 0.0,
            b: -1.0,
            kind: RowKind::Cbf,
            tag: 0,
        });
        let e = DumpEntry::new(3, &p, &solve(&p));
        assert_eq!(e.status, QpStatus::Infeasible);
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"kkt_residual\":null"));
        assert_eq!(serde_json::from_str::<DumpEntry>(&json).unwrap(), e);
    }
}
