//! Beta loss over independent per-class Beta densities.
//!
//! For one actor `j` and class `i` the loss is the expected binary
//! cross-entropy under `Beta(p; α, β)`:
//!
//! ```text
//! y  (ψ(α+β) − ψ(α))  +  (1−y) (ψ(α+β) − ψ(β))
//! ```
//!
//! Gradients here are with respect to `(α, β)` directly; the model layer
//! chains them through the evidence function.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, digamma_unchecked, trigamma_unchecked};

/// Binary N×K label matrix, stored as `f64` zeros and ones.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix(Array2<f64>);

impl LabelMatrix {
    pub fn new(y: Array2<f64>) -> Result<Self> {
        if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::domain(
                "label_matrix",
                format!("labels must be 0 or 1, found {v}"),
            ));
        }
        Ok(Self(y))
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("label_matrix", "ragged label rows"));
        }
        let flat = rows.iter().flatten().map(|&v| f64::from(v)).collect();
        let y = Array2::from_shape_vec((rows.len(), k), flat)
            .map_err(|e| Error::shape("label_matrix", e.to_string()))?;
        Self::new(y)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self(self.0.select(ndarray::Axis(0), indices))
    }
}

/// How per-actor losses are combined into a batch objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

impl Reduction {
    pub(crate) fn scale(self, n: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / n.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub per_actor: Vec<f64>,
}

fn check_inputs(
    op: &'static str,
    alpha: &ArrayView2<f64>,
    beta: &ArrayView2<f64>,
    y: &LabelMatrix,
) -> Result<()> {
    if alpha.dim() != beta.dim() || alpha.dim() != y.0.dim() {
        return Err(Error::shape(
            op,
            format!(
                "alpha {:?}, beta {:?}, labels {:?}",
                alpha.dim(),
                beta.dim(),
                y.0.dim()
            ),
        ));
    }
    if let Some(v) = alpha
        .iter()
        .chain(beta.iter())
        .find(|v| !(v.is_finite() && **v >= 1.0))
    {
        return Err(Error::domain(
            op,
            format!("evidence must be >= 1, found {v}"),
        ));
    }
    Ok(())
}

#[inline]
fn term(alpha: f64, beta: f64, y: f64) -> f64 {
    let total = digamma_unchecked(alpha + beta);
    y * (total - digamma_unchecked(alpha)) + (1.0 - y) * (total - digamma_unchecked(beta))
}

/// Sum-reduced Beta loss with its per-actor breakdown.
pub fn beta_loss(
    alpha: ArrayView2<f64>,
    beta: ArrayView2<f64>,
    y: &LabelMatrix,
) -> Result<LossReport> {
    check_inputs("beta_loss", &alpha, &beta, y)?;
    let per_actor: Vec<f64> = alpha
        .outer_iter()
        .zip(beta.outer_iter())
        .zip(y.0.outer_iter())
        .map(|((a, b), yy)| {
            compensated_sum(
                a.iter()
                    .zip(b.iter())
                    .zip(yy.iter())
                    .map(|((&a, &b), &y)| term(a, b, y)),
            )
        })
        .collect();
    let total = compensated_sum(per_actor.iter().copied());
    Ok(LossReport { total, per_actor })
}

/// `(∂L/∂α, ∂L/∂β)` of the sum-reduced loss.
///
/// `∂L/∂α = ψ′(α+β) − y ψ′(α)` and `∂L/∂β = ψ′(α+β) − (1−y) ψ′(β)`.
pub fn beta_loss_grad(
    alpha: ArrayView2<f64>,
    beta: ArrayView2<f64>,
    y: &LabelMatrix,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_inputs("beta_loss_grad", &alpha, &beta, y)?;
    let mut d_alpha = Array2::zeros(alpha.dim());
    let mut d_beta = Array2::zeros(alpha.dim());
    Zip::from(&mut d_alpha)
        .and(&mut d_beta)
        .and(&alpha)
        .and(&beta)
        .and(&y.0)
        .for_each(|da, db, &a, &b, &y| {
            let total = trigamma_unchecked(a + b);
            *da = total - y * trigamma_unchecked(a);
            *db = total - (1.0 - y) * trigamma_unchecked(b);
        });
    Ok((d_alpha, d_beta))
}

/// Expected cross-entropy under a Dirichlet with concentrations `alphas`
/// for a one-hot (or soft) target: `Σ_i y_i (ψ(Σα) − ψ(α_i))`.
pub fn dirichlet_loss(alphas: &[f64], target: &[f64]) -> Result<f64> {
    if alphas.len() != target.len() || alphas.is_empty() {
        return Err(Error::shape(
            "dirichlet_loss",
            format!("{} concentrations, {} targets", alphas.len(), target.len()),
        ));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::domain(
            "dirichlet_loss",
            format!("concentrations must be > 0, found {a}"),
        ));
    }
    let strength: f64 = alphas.iter().sum();
    let psi_strength = digamma_unchecked(strength);
    Ok(alphas
        .iter()
        .zip(target)
        .map(|(&a, &y)| y * (psi_strength - digamma_unchecked(a)))
        .sum())
}

/// The two-class Dirichlet loss with concentrations `(α, β)` and the one-hot
/// target `(y, 1 − y)`. Coincides with the single-class Beta loss.
pub fn dirichlet_binary_loss(alpha: f64, beta: f64, y: u8) -> Result<f64> {
    if y > 1 {
        return Err(Error::domain(
            "dirichlet_binary_loss",
            format!("label must be 0 or 1, got {y}"),
        ));
    }
    if !(alpha >= 1.0 && beta >= 1.0) {
        return Err(Error::domain(
            "dirichlet_binary_loss",
            format!("evidence must be >= 1, got alpha={alpha}, beta={beta}"),
        ));
    }
    let y = f64::from(y);
    dirichlet_loss(&[alpha, beta], &[y, 1.0 - y])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn single(a: f64, b: f64, y: f64) -> f64 {
        let labels = LabelMatrix::new(array![[y]]).unwrap();
        beta_loss(array![[a]].view(), array![[b]].view(), &labels)
            .unwrap()
            .total
    }

    #[test]
    fn loss_examples() {
        assert_abs_diff_eq!(single(1.0, 1.0, 1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(single(1.0, 1.0, 0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(single(9.0, 1.0, 1.0), 1.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let labels = LabelMatrix::new(array![[1.0]]).unwrap();
        let (da, db) = beta_loss_grad(array![[1.0]].view(), array![[1.0]].view(), &labels).unwrap();
        assert_abs_diff_eq!(da[[0, 0]], -1.0, epsilon = 1e-10);
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert_abs_diff_eq!(db[[0, 0]], pi2_6 - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn dirichlet_examples() {
        assert_abs_diff_eq!(
            dirichlet_binary_loss(1.0, 1.0, 1).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            dirichlet_binary_loss(9.0, 1.0, 1).unwrap(),
            1.0 / 9.0,
            epsilon = 1e-12
        );
        assert!(dirichlet_binary_loss(2.0, 2.0, 2).is_err());
        assert!(dirichlet_binary_loss(0.5, 2.0, 0).is_err());
    }

    #[test]
    fn report_total_is_sum_of_actors() {
        let a = array![[1.5, 2.0, 7.0], [3.0, 1.0, 1.2]];
        let b = array![[1.0, 4.0, 2.0], [1.1, 9.0, 2.5]];
        let y = LabelMatrix::new(array![[1.0, 0.0, 1.0], [0.0, 0.0, 1.0]]).unwrap();
        let r = beta_loss(a.view(), b.view(), &y).unwrap();
        assert_eq!(r.per_actor.len(), 2);
        let s: f64 = r.per_actor.iter().sum();
        assert!(((r.total - s) / s).abs() < 1e-9);
        assert!(r.per_actor.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn errors_on_shape_and_floor() {
        let y = LabelMatrix::new(array![[1.0, 0.0]]).unwrap();
        assert!(beta_loss(array![[1.0]].view(), array![[1.0]].view(), &y).is_err());
        assert!(beta_loss(array![[0.9, 1.0]].view(), array![[1.0, 1.0]].view(), &y).is_err());
        assert!(LabelMatrix::new(array![[0.5]]).is_err());
        assert!(LabelMatrix::from_rows(&[vec![1, 0], vec![1]]).is_err());
    }
}
