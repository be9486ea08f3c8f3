//! Per-step trajectory records and their CSV form.
//!
//! Column order is fixed: `t, px, py, pz, l1..l3, u1..um, prx..prz,
//! pex..pez, le1..le3, e_p, e_lambda, eta_lambda, eta_p`. Values are written
//! with the shortest round-trip float formatting, so re-parsing a log
//! reproduces the run bit for bit.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

/// One integration step's observables.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub t: f64,
    pub p: Vector3<f64>,
    pub lambda: Vector3<f64>,
    pub u: DVector<f64>,
    /// Reference velocity at the step's start.
    pub p_dot_r: Vector3<f64>,
    /// World velocity error.
    pub p_dot_e: Vector3<f64>,
    /// Local velocity error.
    pub lambda_dot_e: Vector3<f64>,
    /// Squared world error norm.
    pub e_p: f64,
    /// Squared local error norm.
    pub e_lambda: f64,
    /// Smallest eigenvalue of the actuation Gram matrix at this state.
    pub eta_lambda: f64,
    /// Smallest eigenvalue of the kinematic Gram matrix at this state.
    pub eta_p: f64,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// Integrated through the full horizon.
    TimeLimit,
    /// Reached the capture condition early.
    Captured { t: f64 },
}

/// Post-run summary, written as a JSON sidecar next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub termination: Termination,
    pub steps: usize,
    /// Distance to the reference's target at the last row, when one exists.
    pub final_target_distance: Option<f64>,
    /// Earliest time from which the radial speed stays inside the settling
    /// band around the rated speed.
    pub v_settling_time: Option<f64>,
    /// Largest control magnitude over the run.
    pub max_control: f64,
    /// Smallest inter-agent distance, for multi-agent runs.
    pub min_inter_distance: Option<f64>,
    /// Reference-freeze mode the log was produced under ("lambda" or "p").
    #[serde(default)]
    pub freeze: Option<String>,
}

/// Full record of one simulation run.
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub control_dim: usize,
    pub rows: Vec<LogRow>,
    pub summary: RunSummary,
}

#[derive(Debug, Error)]
pub enum LogParseError {
    #[error("empty log")]
    Empty,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

impl TrajectoryLog {
    pub fn header(control_dim: usize) -> String {
        let mut h = String::from("t,px,py,pz,l1,l2,l3");
        for i in 1..=control_dim {
            let _ = write!(h, ",u{i}");
        }
        h.push_str(",prx,pry,prz,pex,pey,pez,le1,le2,le3,e_p,e_lambda,eta_lambda,eta_p");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.control_dim);
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{},{}", row.t, row.p[0], row.p[1], row.p[2]);
            for i in 0..3 {
                let _ = write!(out, ",{}", row.lambda[i]);
            }
            for i in 0..self.control_dim {
                let _ = write!(out, ",{}", row.u[i]);
            }
            for v in [&row.p_dot_r, &row.p_dot_e, &row.lambda_dot_e] {
                let _ = write!(out, ",{},{},{}", v[0], v[1], v[2]);
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                row.e_p, row.e_lambda, row.eta_lambda, row.eta_p
            );
        }
        out
    }

    /// Parse a CSV produced by [`to_csv`](Self::to_csv). The summary is not
    /// stored in the CSV and comes back as a neutral placeholder.
    pub fn from_csv(text: &str) -> Result<Self, LogParseError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(LogParseError::Empty)?;
        let columns: Vec<&str> = header.split(',').collect();
        let control_dim = columns.iter().filter(|c| c.starts_with('u')).count();
        let expected = 20 + control_dim;
        if columns.len() != expected {
            return Err(LogParseError::Malformed {
                line: 1,
                message: format!("expected {expected} columns, found {}", columns.len()),
            });
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let fields = fields.map_err(|e| LogParseError::Malformed {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if fields.len() != expected {
                return Err(LogParseError::Malformed {
                    line: idx + 1,
                    message: format!("expected {expected} fields, found {}", fields.len()),
                });
            }
            let mut at = 0usize;
            let mut take = |n: usize| {
                let s = &fields[at..at + n];
                at += n;
                s.to_vec()
            };
            let t = take(1)[0];
            let p = take(3);
            let lambda = take(3);
            let u = take(control_dim);
            let p_dot_r = take(3);
            let p_dot_e = take(3);
            let lambda_dot_e = take(3);
            let tail = take(4);
            rows.push(LogRow {
                t,
                p: Vector3::from_row_slice(&p),
                lambda: Vector3::from_row_slice(&lambda),
                u: DVector::from_vec(u),
                p_dot_r: Vector3::from_row_slice(&p_dot_r),
                p_dot_e: Vector3::from_row_slice(&p_dot_e),
                lambda_dot_e: Vector3::from_row_slice(&lambda_dot_e),
                e_p: tail[0],
                e_lambda: tail[1],
                eta_lambda: tail[2],
                eta_p: tail[3],
            });
        }
        if rows.is_empty() {
            return Err(LogParseError::Empty);
        }
        Ok(Self {
            control_dim,
            rows,
            summary: RunSummary {
                termination: Termination::TimeLimit,
                steps: 0,
                final_target_distance: None,
                v_settling_time: None,
                max_control: f64::NAN,
                min_inter_distance: None,
                freeze: None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(t: f64) -> LogRow {
        LogRow {
            t,
            p: Vector3::new(0.1, -0.2, 0.3),
            lambda: Vector3::new(1.0, 0.05, -0.7),
            u: DVector::from_vec(vec![0.25, -0.125]),
            p_dot_r: Vector3::new(1.0, 0.0, 0.0),
            p_dot_e: Vector3::new(0.01, 0.02, -0.03),
            lambda_dot_e: Vector3::new(0.0, 1e-17, 0.0),
            e_p: 0.0014,
            e_lambda: 1e-34,
            eta_lambda: 0.0,
            eta_p: 1.0,
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        let log = TrajectoryLog {
            control_dim: 2,
            rows: vec![sample_row(0.0), sample_row(0.01)],
            summary: RunSummary {
                termination: Termination::TimeLimit,
                steps: 1,
                final_target_distance: None,
                v_settling_time: None,
                max_control: 0.25,
                min_inter_distance: None,
                freeze: None,
            },
        };
        let text = log.to_csv();
        let parsed = TrajectoryLog::from_csv(&text).unwrap();
        assert_eq!(parsed.control_dim, 2);
        assert_eq!(parsed.rows.len(), 2);
        for (a, b) in log.rows.iter().zip(&parsed.rows) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.p, b.p);
            assert_eq!(a.u, b.u);
            assert_eq!(a.lambda_dot_e, b.lambda_dot_e);
            assert_eq!(a.e_lambda, b.e_lambda);
        }
        // Same bytes when re-serialized.
        assert_eq!(parsed.to_csv(), text);
    }

    #[test]
    fn malformed_line_is_reported_with_its_number() {
        let text = format!("{}\n1,2,3\n", TrajectoryLog::header(1));
        let err = TrajectoryLog::from_csv(&text).unwrap_err();
        assert!(matches!(err, LogParseError::Malformed { line: 2, .. }));
    }
}
