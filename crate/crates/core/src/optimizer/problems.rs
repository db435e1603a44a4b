//! Convex problems with analytically known optima, used to certify the
//! primal-dual scheme.

use super::{ConstrainedObjective, PrimalConfig, PrimalMode, RunConfig};

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;
type ArgminFn = Box<dyn Fn(f64) -> Option<Vec<f64>> + Send + Sync>;

/// Objective assembled from closures.
pub struct FnObjective {
    dim: usize,
    loss: ScalarFn,
    constraint: ScalarFn,
    lagrangian_grad: GradFn,
    argmin: Option<ArgminFn>,
}

impl FnObjective {
    pub fn new(
        dim: usize,
        loss: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        constraint: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        lagrangian_grad: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            loss: Box::new(loss),
            constraint: Box::new(constraint),
            lagrangian_grad: Box::new(lagrangian_grad),
            argmin: None,
        }
    }

    pub fn with_argmin(
        mut self,
        argmin: impl Fn(f64) -> Option<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.argmin = Some(Box::new(argmin));
        self
    }
}

impl std::fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnObjective")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl ConstrainedObjective for FnObjective {
    fn dim(&self) -> usize {
        self.dim
    }
    fn loss(&self, theta: &[f64]) -> f64 {
        (self.loss)(theta)
    }
    fn constraint(&self, theta: &[f64]) -> f64 {
        (self.constraint)(theta)
    }
    fn lagrangian_grad(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        (self.lagrangian_grad)(theta, lambda)
    }
    fn exact_argmin(&self, lambda: f64) -> Option<Vec<f64>> {
        self.argmin.as_ref().and_then(|f| f(lambda))
    }
}

/// `min x²  s.t. (1 − x)₊ ≤ 0` on `Θ = [0, 2]`: `x* = 1`, `f* = 1`, `λ* = 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ActiveQuadratic;

impl ConstrainedObjective for ActiveQuadratic {
    fn dim(&self) -> usize {
        1
    }
    fn loss(&self, t: &[f64]) -> f64 {
        t[0] * t[0]
    }
    fn constraint(&self, t: &[f64]) -> f64 {
        (1.0 - t[0]).max(0.0)
    }
    fn lagrangian_grad(&self, t: &[f64], lambda: f64) -> Vec<f64> {
        let hinge = if t[0] < 1.0 { -1.0 } else { 0.0 };
        vec![2.0 * t[0] + lambda * hinge]
    }
    fn exact_argmin(&self, lambda: f64) -> Option<Vec<f64>> {
        Some(vec![(0.5 * lambda).clamp(0.0, 1.0)])
    }
}

/// `min (x − 0.5)²  s.t. (x − 1)₊ ≤ 0`: the constraint is slack,
/// `f* = 0`, `λ* = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SlackQuadratic;

impl ConstrainedObjective for SlackQuadratic {
    fn dim(&self) -> usize {
        1
    }
    fn loss(&self, t: &[f64]) -> f64 {
        (t[0] - 0.5).powi(2)
    }
    fn constraint(&self, t: &[f64]) -> f64 {
        (t[0] - 1.0).max(0.0)
    }
    fn lagrangian_grad(&self, t: &[f64], lambda: f64) -> Vec<f64> {
        let hinge = if t[0] > 1.0 { 1.0 } else { 0.0 };
        vec![2.0 * (t[0] - 0.5) + lambda * hinge]
    }
    fn exact_argmin(&self, _lambda: f64) -> Option<Vec<f64>> {
        Some(vec![0.5])
    }
}

/// Squared distance to `c` under the half-space constraint `⟨a, θ⟩ ≤ b`,
/// written as `g(θ) = (⟨a, θ⟩ − b)₊`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceProjection {
    pub center: Vec<f64>,
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Default for HalfspaceProjection {
    /// `c = (3, 1)`, `a = (1, 1)`, `b = 1`: `θ* = (1.5, −0.5)`, `f* = 4.5`,
    /// `λ* = 3`.
    fn default() -> Self {
        Self {
            center: vec![3.0, 1.0],
            normal: vec![1.0, 1.0],
            offset: 1.0,
        }
    }
}

impl HalfspaceProjection {
    fn excess(&self, t: &[f64]) -> f64 {
        dot(&self.normal, t) - self.offset
    }

    fn normal_sq(&self) -> f64 {
        dot(&self.normal, &self.normal)
    }

    pub fn optimum(&self) -> Vec<f64> {
        let shift = self.excess(&self.center).max(0.0) / self.normal_sq();
        self.center
            .iter()
            .zip(&self.normal)
            .map(|(c, a)| c - shift * a)
            .collect()
    }

    pub fn f_star(&self) -> f64 {
        let e = self.excess(&self.center).max(0.0);
        e * e / self.normal_sq()
    }

    pub fn lambda_star(&self) -> f64 {
        2.0 * self.excess(&self.center).max(0.0) / self.normal_sq()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConstrainedObjective for HalfspaceProjection {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn loss(&self, t: &[f64]) -> f64 {
        t.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum()
    }
    fn constraint(&self, t: &[f64]) -> f64 {
        self.excess(t).max(0.0)
    }
    fn lagrangian_grad(&self, t: &[f64], lambda: f64) -> Vec<f64> {
        let active = if self.excess(t) > 0.0 { lambda } else { 0.0 };
        t.iter()
            .zip(&self.center)
            .zip(&self.normal)
            .map(|((x, c), a)| 2.0 * (x - c) + active * a)
            .collect()
    }
    fn exact_argmin(&self, lambda: f64) -> Option<Vec<f64>> {
        // Unconstrained stationary point c − (λ/2)a while it stays on the
        // violating side, otherwise the projection onto the boundary.
        if lambda <= self.lambda_star() {
            Some(
                self.center
                    .iter()
                    .zip(&self.normal)
                    .map(|(c, a)| c - 0.5 * lambda * a)
                    .collect(),
            )
        } else {
            Some(self.optimum())
        }
    }
}

/// `min e^{−x}  s.t. (x − 1)₊ ≤ 0` on `Θ = [−1, 3]`: `x* = 1`,
/// `f* = λ* = e^{−1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExponentialBox;

impl ExponentialBox {
    pub const LOWER: f64 = -1.0;
    pub const UPPER: f64 = 3.0;
}

impl ConstrainedObjective for ExponentialBox {
    fn dim(&self) -> usize {
        1
    }
    fn loss(&self, t: &[f64]) -> f64 {
        (-t[0]).exp()
    }
    fn constraint(&self, t: &[f64]) -> f64 {
        (t[0] - 1.0).max(0.0)
    }
    fn lagrangian_grad(&self, t: &[f64], lambda: f64) -> Vec<f64> {
        let hinge = if t[0] > 1.0 { 1.0 } else { 0.0 };
        vec![-(-t[0]).exp() + lambda * hinge]
    }
    fn exact_argmin(&self, lambda: f64) -> Option<Vec<f64>> {
        // Decreasing on x ≤ 1, stationary at −ln λ beyond it.
        let x = if lambda <= 0.0 {
            Self::UPPER
        } else {
            (-lambda.ln()).clamp(1.0, Self::UPPER)
        };
        Some(vec![x])
    }
}

/// A convex oracle problem together with the analytic constants its
/// certificates need.
pub struct ConvexProblem {
    pub name: String,
    pub objective: Box<dyn ConstrainedObjective + Send + Sync>,
    /// Optimal value `f*`.
    pub f_star: f64,
    /// Optimal multiplier `λ*`.
    pub lambda_star: f64,
    /// `L` with `|g(θ̃)| < L` along the run.
    pub constraint_bound: f64,
    /// `G` with `‖θ‖, ‖θ̃‖ ≤ G` on the feasible parameter set.
    pub norm_bound: f64,
}

impl std::fmt::Debug for ConvexProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexProblem")
            .field("name", &self.name)
            .field("f_star", &self.f_star)
            .field("lambda_star", &self.lambda_star)
            .field("constraint_bound", &self.constraint_bound)
            .field("norm_bound", &self.norm_bound)
            .finish_non_exhaustive()
    }
}

/// One problem of the certification suite with its run settings.
#[derive(Debug)]
pub struct SuiteCase {
    pub problem: ConvexProblem,
    pub config: RunConfig,
}

fn exact_config(theta0: Vec<f64>, lambda0: f64, max_steps: usize) -> RunConfig {
    RunConfig {
        primal: PrimalConfig {
            mode: PrimalMode::Exact,
            keep_history: false,
            ..PrimalConfig::default()
        },
        eta2: 10.0,
        delta: 1e-4,
        gamma: 0.0,
        lambda0,
        theta0,
        max_steps,
    }
}

/// The built-in certification suite: three problems with an active
/// constraint and one with a slack constraint, all in exact-primal mode.
///
/// Active problems start with the dual at `λ*` and the primal a distance
/// of 0.1 inside the violating region. From a cold dual start the averaged
/// iterate keeps an `O(1/m)` violation inherited from the early iterates,
/// and `λ^(m)/(mη₂)` then decays too slowly to certify `g(θ̃)` at every
/// step.
pub fn convex_suite(max_steps: usize) -> Vec<SuiteCase> {
    let halfspace = HalfspaceProjection::default();
    let x_star = halfspace.optimum();
    let a_norm = halfspace.normal_sq().sqrt();
    let theta0: Vec<f64> = x_star
        .iter()
        .zip(&halfspace.normal)
        .map(|(x, a)| x + 0.1 * a / a_norm)
        .collect();
    let e_inv = (-1.0f64).exp();

    vec![
        SuiteCase {
            problem: ConvexProblem {
                name: "active_quadratic".into(),
                objective: Box::new(ActiveQuadratic),
                f_star: 1.0,
                lambda_star: 2.0,
                constraint_bound: 1.5,
                norm_bound: 1.0,
            },
            config: exact_config(vec![0.9], 2.0, max_steps),
        },
        SuiteCase {
            problem: ConvexProblem {
                name: "halfspace_projection".into(),
                f_star: halfspace.f_star(),
                lambda_star: halfspace.lambda_star(),
                constraint_bound: 3.5,
                norm_bound: dot(&halfspace.center, &halfspace.center).sqrt(),
                objective: Box::new(halfspace),
            },
            config: exact_config(theta0, 3.0, max_steps),
        },
        SuiteCase {
            problem: ConvexProblem {
                name: "exponential_box".into(),
                objective: Box::new(ExponentialBox),
                f_star: e_inv,
                lambda_star: e_inv,
                constraint_bound: 2.5,
                norm_bound: ExponentialBox::UPPER,
            },
            config: exact_config(vec![1.1], e_inv, max_steps),
        },
        SuiteCase {
            problem: ConvexProblem {
                name: "slack_quadratic".into(),
                objective: Box::new(SlackQuadratic),
                f_star: 0.0,
                lambda_star: 0.0,
                constraint_bound: 1.0,
                norm_bound: 1.0,
            },
            config: exact_config(vec![0.0], 0.0, max_steps),
        },
    ]
}
