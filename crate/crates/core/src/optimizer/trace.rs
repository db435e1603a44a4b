use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{Averaging, Prop2Report};
use crate::error::{Error, Result};

/// State after iteration `step`; row 0 is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    /// Raw primal iterate `θ^(m)`.
    pub iterate: Vec<f64>,
    /// `θ̃^(m)`; equal to `θ^(0)` in row 0.
    pub average: Vec<f64>,
    pub lambda: f64,
    pub loss_avg: f64,
    pub constraint_avg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub eta2: f64,
    pub lambda0: f64,
    pub gamma: f64,
    pub averaging: Averaging,
    pub rows: Vec<TraceRow>,
}

impl TraceReport {
    /// Builds a trace from a given raw iterate sequence `θ^(0), θ^(1), …`,
    /// averaging it the same way the optimizer does. Dual and objective
    /// columns are zero.
    pub fn from_iterates(iterates: &[Vec<f64>], averaging: Averaging) -> Self {
        let mut rows = Vec::with_capacity(iterates.len());
        if let Some(first) = iterates.first() {
            let mut mean = super::RunningMean::new(first.len(), averaging, false);
            rows.push(TraceRow {
                step: 0,
                iterate: first.clone(),
                average: first.clone(),
                lambda: 0.0,
                loss_avg: 0.0,
                constraint_avg: 0.0,
            });
            for (m, pair) in iterates.windows(2).enumerate() {
                mean.push(&pair[0]);
                rows.push(TraceRow {
                    step: m + 1,
                    iterate: pair[1].clone(),
                    average: mean.mean().to_vec(),
                    lambda: 0.0,
                    loss_avg: 0.0,
                    constraint_avg: 0.0,
                });
            }
        }
        Self {
            eta2: 1.0,
            lambda0: 0.0,
            gamma: 0.0,
            averaging,
            rows,
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Serialize)]
struct CsvRow {
    step: usize,
    loss_avg: f64,
    constraint_avg: f64,
    lambda: f64,
    bound1_lhs: Option<f64>,
    bound1_rhs: Option<f64>,
    bound2_rhs: Option<f64>,
    bound3_rhs: Option<f64>,
}

/// Opens a CSV writer on `path` after writing each comment as a `# ` line.
pub(crate) fn commented_csv(path: &Path, comments: &[String]) -> Result<csv::Writer<File>> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for c in comments {
        writeln!(file, "# {c}").map_err(|e| Error::io(path, e))?;
    }
    Ok(csv::Writer::from_writer(file))
}

/// Writes `step, loss_avg, constraint_avg, lambda, bound1_lhs, bound1_rhs,
/// bound2_rhs, bound3_rhs` after `#`-prefixed comment lines. Bound columns
/// stay empty without a certificate report and on row 0.
pub fn write_trace_csv(
    path: &Path,
    trace: &TraceReport,
    bounds: Option<&Prop2Report>,
    comments: &[String],
) -> Result<()> {
    let mut w = commented_csv(path, comments)?;
    for row in &trace.rows {
        let b = bounds.and_then(|r| r.rows.iter().find(|b| b.step == row.step));
        w.serialize(CsvRow {
            step: row.step,
            loss_avg: row.loss_avg,
            constraint_avg: row.constraint_avg,
            lambda: row.lambda,
            bound1_lhs: b.map(|b| b.violation),
            bound1_rhs: b.map(|b| b.bound1_rhs),
            bound2_rhs: b.map(|b| b.bound2_rhs),
            bound3_rhs: b.map(|b| b.bound3_rhs),
        })
        .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
