//! Primal-dual averaging for `min 𝓛(θ)  s.t.  g(θ) ≤ γ`.
//!
//! Each iteration `m = 1, 2, …`:
//!
//! 1. primal step on `L(θ, λ) = 𝓛(θ) + λ(g(θ) − γ) − (δ/2)λ²` from
//!    `(θ^(m−1), λ^(m−1))`, either one Adam step or the exact argmin;
//! 2. running average `θ̃^(m)` of the raw iterates `θ^(0..m−1)`;
//! 3. optionally reset the working point to `θ̃^(m)`;
//! 4. projected dual step `λ^(m) = max{λ^(m−1) + η₂(g(θ̃^(m)) − γ − δλ^(m−1)), 0}`.
//!
//! The average never includes the iterate produced in the same step.

mod adam;
mod certificates;
mod problems;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{Adam, AdamParams};
pub use certificates::{
    check_prop1, check_prop2_bounds, Prop1Report, Prop1Violation, Prop2Bounds, Prop2Report,
    Prop2Row, Prop2Violation,
};
pub use problems::{
    convex_suite, ActiveQuadratic, ConvexProblem, ExponentialBox, FnObjective, HalfspaceProjection,
    SlackQuadratic, SuiteCase,
};
pub(crate) use trace::commented_csv;
pub use trace::{write_trace_csv, TraceReport, TraceRow};

/// A constrained objective over a flat parameter vector.
pub trait ConstrainedObjective {
    fn dim(&self) -> usize;

    fn loss(&self, theta: &[f64]) -> f64;

    /// `g(θ)`, nonnegative.
    fn constraint(&self, theta: &[f64]) -> f64;

    /// `∇𝓛(θ) + λ ∇g(θ)`.
    fn lagrangian_grad(&self, theta: &[f64], lambda: f64) -> Vec<f64>;

    /// `(𝓛(θ), g(θ))`; override when both come out of one pass.
    fn evaluate(&self, theta: &[f64]) -> (f64, f64) {
        (self.loss(theta), self.constraint(theta))
    }

    /// `argmin_θ 𝓛(θ) + λ g(θ)` over the feasible parameter set, if known.
    fn exact_argmin(&self, _lambda: f64) -> Option<Vec<f64>> {
        None
    }
}

impl<T: ConstrainedObjective + ?Sized> ConstrainedObjective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn loss(&self, theta: &[f64]) -> f64 {
        (**self).loss(theta)
    }
    fn constraint(&self, theta: &[f64]) -> f64 {
        (**self).constraint(theta)
    }
    fn lagrangian_grad(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        (**self).lagrangian_grad(theta, lambda)
    }
    fn evaluate(&self, theta: &[f64]) -> (f64, f64) {
        (**self).evaluate(theta)
    }
    fn exact_argmin(&self, lambda: f64) -> Option<Vec<f64>> {
        (**self).exact_argmin(lambda)
    }
}

/// `L(θ, λ) = 𝓛(θ) + λ(g(θ) − γ) − (δ/2)λ²`.
pub fn lagrangian<O: ConstrainedObjective + ?Sized>(
    theta: &[f64],
    lambda: f64,
    objective: &O,
    gamma: f64,
    delta: f64,
) -> f64 {
    let (loss, g) = objective.evaluate(theta);
    if lambda == 0.0 {
        return loss;
    }
    loss + lambda * (g - gamma) - 0.5 * delta * lambda * lambda
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimalMode {
    /// One Adam step on the Lagrangian per iteration.
    #[default]
    Adam,
    /// Exact minimisation of the Lagrangian in `θ`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// `θ̃^(m) = (1/m) Σ_{i=0}^{m−1} θ^(i)`.
    #[default]
    Proper,
    /// `θ̃^(m) = (1/m) Σ_{i=1}^{m−1} θ^(i)`: `m − 1` terms over `m`.
    Literal,
}

/// Hyperparameters of the primal side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimalConfig {
    pub eta1: f64,
    pub mode: PrimalMode,
    pub averaging: Averaging,
    /// Set the working point to `θ̃^(m)` after every step.
    pub reset_to_average: bool,
    /// Keep every averaged iterate so the mean can be recomputed.
    pub keep_history: bool,
    pub adam: AdamParams,
}

impl Default for PrimalConfig {
    fn default() -> Self {
        Self {
            eta1: 1e-3,
            mode: PrimalMode::Adam,
            averaging: Averaging::Proper,
            reset_to_average: true,
            keep_history: false,
            adam: AdamParams::default(),
        }
    }
}

/// Incrementally maintained mean of the iterates pushed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMean {
    mean: Vec<f64>,
    count: usize,
    literal: bool,
    history: Option<Vec<Vec<f64>>>,
}

impl RunningMean {
    pub fn new(dim: usize, averaging: Averaging, keep_history: bool) -> Self {
        Self {
            mean: vec![0.0; dim],
            count: 0,
            literal: averaging == Averaging::Literal,
            history: keep_history.then(Vec::new),
        }
    }

    /// Adds one iterate: `mean ← mean + (x − mean)/(count + 1)`.
    ///
    /// In literal mode the very first iterate enters as the zero vector.
    pub fn push(&mut self, x: &[f64]) {
        let zeroed;
        let x = if self.literal && self.count == 0 {
            zeroed = vec![0.0; x.len()];
            &zeroed[..]
        } else {
            x
        };
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, &xi) in self.mean.iter_mut().zip(x) {
            *m += (xi - *m) * w;
        }
        if let Some(h) = self.history.as_mut() {
            h.push(x.to_vec());
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn history(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }

    /// Mean of the stored history, computed from scratch.
    pub fn recompute(&self) -> Option<Vec<f64>> {
        let h = self.history.as_ref()?;
        if h.is_empty() {
            return None;
        }
        let dim = self.mean.len();
        let mut out = vec![0.0; dim];
        for x in h {
            for (o, v) in out.iter_mut().zip(x) {
                *o += v;
            }
        }
        let n = h.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        Some(out)
    }
}

/// Primal iterate, its running average and the Adam moments.
#[derive(Debug, Clone)]
pub struct PrimalState {
    /// Working point from which the next primal step starts.
    pub theta: Vec<f64>,
    /// Raw iterate `θ^(m)` produced by the last primal step.
    pub iterate: Vec<f64>,
    pub average: RunningMean,
    pub adam: Adam,
    pub step: usize,
}

impl PrimalState {
    pub fn new(theta0: Vec<f64>, config: &PrimalConfig) -> Self {
        let dim = theta0.len();
        Self {
            iterate: theta0.clone(),
            theta: theta0,
            average: RunningMean::new(dim, config.averaging, config.keep_history),
            adam: Adam::new(dim, config.adam),
            step: 0,
        }
    }

    /// `θ̃^(m)`; before the first step this is `θ^(0)`.
    pub fn averaged(&self) -> &[f64] {
        if self.average.count() == 0 {
            &self.iterate
        } else {
            self.average.mean()
        }
    }
}

/// Dual variable and the constants of the dual step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub eta2: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Keep `λ` fixed (used to train without the constraint).
    #[serde(default)]
    pub frozen: bool,
}

impl DualState {
    pub fn new(lambda0: f64, eta2: f64, delta: f64, gamma: f64) -> Result<Self> {
        let state = Self {
            lambda: lambda0,
            eta2,
            delta,
            gamma,
            frozen: false,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.eta2.is_finite() && self.eta2 > 0.0) {
            return Err(Error::Config(format!(
                "eta2 must be > 0, got {}",
                self.eta2
            )));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Projected ascent step given `g(θ̃^(m))`.
    pub fn update(&mut self, constraint_at_average: f64) {
        if self.frozen {
            return;
        }
        let next = self.lambda
            + self.eta2 * (constraint_at_average - self.gamma - self.delta * self.lambda);
        self.lambda = next.max(0.0);
    }
}

/// Diagnostics of one completed iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// `λ^(m)`.
    pub lambda: f64,
    /// `λ^(m−1)`, used by the primal step.
    pub lambda_prev: f64,
    /// `𝓛(θ̃^(m))`.
    pub loss_avg: f64,
    /// `g(θ̃^(m))`.
    pub constraint_avg: f64,
}

/// One iteration of the primal-dual average scheme, updating both states in
/// place.
pub fn algorithm1_step<O: ConstrainedObjective + ?Sized>(
    primal: &mut PrimalState,
    dual: &mut DualState,
    objective: &O,
    config: &PrimalConfig,
) -> Result<StepRecord> {
    let m = primal.step + 1;
    let lambda_prev = dual.lambda;

    let next = match config.mode {
        PrimalMode::Adam => {
            let grad = objective.lagrangian_grad(&primal.theta, lambda_prev);
            if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    step: m,
                    detail: format!("Lagrangian gradient component {bad}"),
                });
            }
            let mut theta = primal.theta.clone();
            primal.adam.step(&mut theta, &grad, config.eta1);
            theta
        }
        PrimalMode::Exact => objective
            .exact_argmin(lambda_prev)
            .ok_or(Error::NoExactArgmin)?,
    };

    primal.average.push(&primal.iterate);
    primal.iterate = next;
    primal.theta = if config.reset_to_average {
        primal.average.mean().to_vec()
    } else {
        primal.iterate.clone()
    };
    primal.step = m;

    let (loss_avg, constraint_avg) = objective.evaluate(primal.average.mean());
    if !loss_avg.is_finite() || !constraint_avg.is_finite() {
        return Err(Error::NonFinite {
            step: m,
            detail: format!("loss {loss_avg}, constraint {constraint_avg} at the averaged iterate"),
        });
    }
    dual.update(constraint_avg);

    Ok(StepRecord {
        step: m,
        lambda: dual.lambda,
        lambda_prev,
        loss_avg,
        constraint_avg,
    })
}

/// Settings for [`run_constrained`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub primal: PrimalConfig,
    pub eta2: f64,
    pub delta: f64,
    pub gamma: f64,
    pub lambda0: f64,
    pub theta0: Vec<f64>,
    pub max_steps: usize,
}

impl RunConfig {
    /// Defaults for everything except the starting point.
    pub fn new(theta0: Vec<f64>) -> Self {
        Self {
            primal: PrimalConfig::default(),
            eta2: 0.01,
            delta: 0.01,
            gamma: 0.0,
            lambda0: 0.0,
            theta0,
            max_steps: 1000,
        }
    }
}

pub(crate) const DIVERGENCE_FACTOR: f64 = 1e6;

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs the scheme for `max_steps` iterations and records every iterate.
pub fn run_constrained<O: ConstrainedObjective + ?Sized>(
    objective: &O,
    config: &RunConfig,
) -> Result<TraceReport> {
    if config.theta0.len() != objective.dim() {
        return Err(Error::shape(
            "run_constrained",
            format!(
                "theta0 has {} entries, objective expects {}",
                config.theta0.len(),
                objective.dim()
            ),
        ));
    }
    if config.primal.mode == PrimalMode::Adam
        && !(config.primal.eta1.is_finite() && config.primal.eta1 > 0.0)
    {
        return Err(Error::Config(format!(
            "eta1 must be > 0, got {}",
            config.primal.eta1
        )));
    }
    let mut dual = DualState::new(config.lambda0, config.eta2, config.delta, config.gamma)?;
    let mut primal = PrimalState::new(config.theta0.clone(), &config.primal);
    let limit = DIVERGENCE_FACTOR * norm(&config.theta0).max(1.0);

    let (loss0, g0) = objective.evaluate(&config.theta0);
    let mut trace = TraceReport {
        eta2: config.eta2,
        lambda0: config.lambda0,
        gamma: config.gamma,
        averaging: config.primal.averaging,
        rows: vec![TraceRow {
            step: 0,
            iterate: config.theta0.clone(),
            average: config.theta0.clone(),
            lambda: config.lambda0,
            loss_avg: loss0,
            constraint_avg: g0,
        }],
    };

    for _ in 0..config.max_steps {
        let rec = algorithm1_step(&mut primal, &mut dual, objective, &config.primal)?;
        let n = norm(&primal.iterate);
        if n > limit {
            return Err(Error::Divergence {
                step: rec.step,
                norm: n,
                limit,
            });
        }
        trace.rows.push(TraceRow {
            step: rec.step,
            iterate: primal.iterate.clone(),
            average: primal.average.mean().to_vec(),
            lambda: rec.lambda,
            loss_avg: rec.loss_avg,
            constraint_avg: rec.constraint_avg,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quadratic_with_hinge() -> FnObjective {
        FnObjective::new(
            1,
            |t| t[0] * t[0],
            |t| (1.0 - t[0]).max(0.0),
            |t, lam| vec![2.0 * t[0] - if t[0] < 1.0 { lam } else { 0.0 }],
        )
    }

    #[test]
    fn lagrangian_examples() {
        let obj = quadratic_with_hinge();
        assert_eq!(lagrangian(&[0.3], 0.0, &obj, 0.0, 0.01), 0.09);
        assert_abs_diff_eq!(
            lagrangian(&[0.0], 2.0, &obj, 0.0, 0.01),
            1.98,
            epsilon = 1e-15
        );

        let zero_loss = FnObjective::new(1, |_| 0.0, |_| 0.25, |_, _| vec![0.0]);
        assert_abs_diff_eq!(
            lagrangian(&[0.0], 3.0, &zero_loss, 0.25, 0.5),
            -0.5 * 0.5 * 9.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn dual_stays_zero_without_violation() {
        let obj = FnObjective::new(
            2,
            |t| t[0] * t[0] + t[1] * t[1],
            |_| 0.0,
            |t, _| vec![2.0 * t[0], 2.0 * t[1]],
        );
        let mut config = RunConfig::new(vec![1.0, -2.0]);
        config.primal.eta1 = 0.05;
        config.max_steps = 200;
        let trace = run_constrained(&obj, &config).unwrap();
        assert!(trace.rows.iter().all(|r| r.lambda == 0.0));
    }

    #[test]
    fn constant_iterates_have_constant_average() {
        let c = vec![0.25, -1.5];
        let c2 = c.clone();
        let obj = FnObjective::new(2, |_| 0.0, |_| 0.0, |_, _| vec![0.0, 0.0])
            .with_argmin(move |_| Some(c2.clone()));
        let mut config = RunConfig::new(c.clone());
        config.primal.mode = PrimalMode::Exact;
        config.max_steps = 50;
        let trace = run_constrained(&obj, &config).unwrap();
        for row in &trace.rows {
            assert_eq!(row.average, c);
        }
    }

    #[test]
    fn zero_steps_is_a_noop() {
        let obj = quadratic_with_hinge();
        let mut config = RunConfig::new(vec![0.4]);
        config.max_steps = 0;
        let trace = run_constrained(&obj, &config).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert_eq!(trace.rows[0].iterate, vec![0.4]);
        assert_eq!(trace.rows[0].lambda, 0.0);
    }

    #[test]
    fn running_mean_matches_recomputation() {
        let mut rm = RunningMean::new(2, Averaging::Proper, true);
        let mut s = crate::numerics::RandomStream::new(3);
        for _ in 0..500 {
            rm.push(&[s.normal(), 10.0 * s.normal()]);
            let fresh = rm.recompute().unwrap();
            for (a, b) in rm.mean().iter().zip(&fresh) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn literal_averaging_drops_the_initial_iterate() {
        let mut rm = RunningMean::new(1, Averaging::Literal, false);
        rm.push(&[5.0]);
        assert_eq!(rm.mean(), &[0.0]);
        rm.push(&[3.0]);
        assert_eq!(rm.mean(), &[1.5]);
    }

    #[test]
    fn non_finite_values_abort_the_step() {
        let obj = FnObjective::new(1, |_| f64::NAN, |_| 0.0, |_, _| vec![1.0]);
        let mut config = RunConfig::new(vec![0.0]);
        config.max_steps = 3;
        assert!(matches!(
            run_constrained(&obj, &config),
            Err(Error::NonFinite { step: 1, .. })
        ));
    }

    #[test]
    fn divergence_is_detected() {
        let obj = FnObjective::new(1, |t| -t[0], |_| 0.0, |_, _| vec![-1.0])
            .with_argmin(|_| Some(vec![1e9]));
        let mut config = RunConfig::new(vec![1.0]);
        config.primal.mode = PrimalMode::Exact;
        config.max_steps = 3;
        assert!(matches!(
            run_constrained(&obj, &config),
            Err(Error::Divergence { step: 1, .. })
        ));
    }

    #[test]
    fn exact_mode_requires_an_argmin() {
        let obj = quadratic_with_hinge();
        let mut config = RunConfig::new(vec![0.0]);
        config.primal.mode = PrimalMode::Exact;
        assert!(matches!(
            run_constrained(&obj, &config),
            Err(Error::NoExactArgmin)
        ));
    }

    #[test]
    fn invalid_dual_settings_are_rejected() {
        assert!(DualState::new(-1.0, 0.1, 0.01, 0.0).is_err());
        assert!(DualState::new(0.0, 0.0, 0.01, 0.0).is_err());
        assert!(DualState::new(0.0, 0.1, -0.01, 0.0).is_err());
    }
}
