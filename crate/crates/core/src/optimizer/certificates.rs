//! Run-time certificates for the averaged primal sequence.
//!
//! [`check_prop1`] verifies the averaging recurrence
//! `θ̃^(m+1) − θ̃^(m) = (θ^(m) − θ̃^(m))/(m+1)` and the step bound
//! `‖θ̃^(m+1) − θ̃^(m)‖ ≤ (‖θ^(m)‖ + ‖θ̃^(m)‖)/(m+1) ≤ 2G/(m+1)` that makes the
//! averages a Cauchy sequence.
//!
//! [`check_prop2_bounds`] verifies, at every `m ≥ 1`,
//!
//! 1. `[g(θ̃^(m))]₊ ≤ λ^(m) / (m η₂)`
//! 2. `𝓛(θ̃^(m)) ≤ f* + (λ^(0))² / (2 m η₂) + η₂ L² / 2`
//! 3. `𝓛(θ̃^(m)) ≥ f* − λ* [g(θ̃^(m))]₊`

use serde::Serialize;

use super::{norm, TraceReport};

/// Absolute slack allowed for floating-point rounding.
const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop1Violation {
    pub step: usize,
    pub step_norm: f64,
    pub local_bound: f64,
    pub global_bound: f64,
    pub recurrence_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Report {
    pub steps_checked: usize,
    pub norm_bound: f64,
    /// Largest `‖θ̃^(m+1) − θ̃^(m) − (θ^(m) − θ̃^(m))/(m+1)‖_∞`.
    pub max_recurrence_error: f64,
    /// Smallest `(‖θ^(m)‖ + ‖θ̃^(m)‖)/(m+1) − ‖θ̃^(m+1) − θ̃^(m)‖`.
    pub min_local_slack: f64,
    /// Smallest `2G/(m+1) − ‖θ̃^(m+1) − θ̃^(m)‖`.
    pub min_global_slack: f64,
    pub first_violation: Option<Prop1Violation>,
}

impl Prop1Report {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks the averaging recurrence and its Cauchy bound on every
/// consecutive pair of rows `m ≥ 1` of `trace`.
pub fn check_prop1(trace: &TraceReport, norm_bound: f64) -> Prop1Report {
    let mut report = Prop1Report {
        steps_checked: 0,
        norm_bound,
        max_recurrence_error: 0.0,
        min_local_slack: f64::INFINITY,
        min_global_slack: f64::INFINITY,
        first_violation: None,
    };
    for pair in trace.rows.windows(2).skip(1) {
        let (cur, next) = (&pair[0], &pair[1]);
        let m = cur.step;
        let k = (m + 1) as f64;
        let diff: Vec<f64> = next
            .average
            .iter()
            .zip(&cur.average)
            .map(|(a, b)| a - b)
            .collect();
        let recurrence_error = diff
            .iter()
            .zip(cur.iterate.iter().zip(&cur.average))
            .map(|(d, (x, a))| (d - (x - a) / k).abs())
            .fold(0.0, f64::max);
        let step_norm = norm(&diff);
        let local_bound = (norm(&cur.iterate) + norm(&cur.average)) / k;
        let global_bound = 2.0 * norm_bound / k;

        report.steps_checked += 1;
        report.max_recurrence_error = report.max_recurrence_error.max(recurrence_error);
        report.min_local_slack = report.min_local_slack.min(local_bound - step_norm);
        report.min_global_slack = report.min_global_slack.min(global_bound - step_norm);

        let scale = 1.0 + norm(&cur.average).max(norm(&cur.iterate));
        let ok = recurrence_error <= TOLERANCE * scale
            && step_norm <= local_bound + TOLERANCE
            && local_bound <= global_bound + TOLERANCE;
        if !ok && report.first_violation.is_none() {
            report.first_violation = Some(Prop1Violation {
                step: m,
                step_norm,
                local_bound,
                global_bound,
                recurrence_error,
            });
        }
    }
    report
}

/// Analytic constants of a convex problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop2Bounds {
    pub f_star: f64,
    pub lambda_star: f64,
    /// `L` with `|g(θ̃^(m))| < L`.
    pub constraint_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop2Row {
    pub step: usize,
    /// `[g(θ̃^(m))]₊`.
    pub violation: f64,
    pub bound1_rhs: f64,
    pub loss: f64,
    pub bound2_rhs: f64,
    pub bound3_rhs: f64,
    pub lambda: f64,
}

impl Prop2Row {
    pub fn bound1_holds(&self) -> bool {
        self.violation <= self.bound1_rhs + TOLERANCE
    }
    pub fn bound2_holds(&self) -> bool {
        self.loss <= self.bound2_rhs + TOLERANCE
    }
    pub fn bound3_holds(&self) -> bool {
        self.loss >= self.bound3_rhs - TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop2Violation {
    pub step: usize,
    /// Which certificate failed: 1, 2 or 3. Zero flags `|g| ≥ L`.
    pub bound: u8,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop2Report {
    pub bounds: Prop2Bounds,
    pub rows: Vec<Prop2Row>,
    pub first_violation: Option<Prop2Violation>,
}

impl Prop2Report {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }

    pub fn last(&self) -> Option<&Prop2Row> {
        self.rows.last()
    }
}

/// Evaluates the three per-step certificates on every row `m ≥ 1`.
pub fn check_prop2_bounds(trace: &TraceReport, bounds: Prop2Bounds) -> Prop2Report {
    let eta2 = trace.eta2;
    let l = bounds.constraint_bound;
    let mut first_violation = None;
    let rows: Vec<Prop2Row> = trace
        .rows
        .iter()
        .skip(1)
        .map(|r| {
            let m = r.step as f64;
            let violation = r.constraint_avg.max(0.0);
            let row = Prop2Row {
                step: r.step,
                violation,
                bound1_rhs: r.lambda / (m * eta2),
                loss: r.loss_avg,
                bound2_rhs: bounds.f_star
                    + trace.lambda0 * trace.lambda0 / (2.0 * m * eta2)
                    + 0.5 * eta2 * l * l,
                bound3_rhs: bounds.f_star - bounds.lambda_star * violation,
                lambda: r.lambda,
            };
            if first_violation.is_none() {
                first_violation = if r.constraint_avg.abs() >= l {
                    Some((0, r.constraint_avg.abs(), l))
                } else if !row.bound1_holds() {
                    Some((1, row.violation, row.bound1_rhs))
                } else if !row.bound2_holds() {
                    Some((2, row.loss, row.bound2_rhs))
                } else if !row.bound3_holds() {
                    Some((3, row.loss, row.bound3_rhs))
                } else {
                    None
                }
                .map(|(bound, lhs, rhs)| Prop2Violation {
                    step: r.step,
                    bound,
                    lhs,
                    rhs,
                });
            }
            row
        })
        .collect();
    Prop2Report {
        bounds,
        rows,
        first_violation,
    }
}
