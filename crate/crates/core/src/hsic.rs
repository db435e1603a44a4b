//! Biased HSIC estimator with Gaussian RBF kernels.
//!
//! `HSIC(Z, X) = tr(K H L H) / (n − 1)²` with `H = I − 11ᵀ/n` and
//! `k(a, b) = exp(−‖a − b‖² / (2σ²))`. Each bandwidth `σ` is the median of
//! the nonzero pairwise distances of its own sample; gradients treat both
//! bandwidths as constants.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::RandomStream;

fn check_rows(op: &'static str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::shape(
            op,
            format!("need at least 2 samples, got {n}"),
        ));
    }
    Ok(())
}

fn check_pair(op: &'static str, z: &ArrayView2<f64>, x: &ArrayView2<f64>) -> Result<()> {
    if z.nrows() != x.nrows() {
        return Err(Error::shape(
            op,
            format!("row counts differ: {} vs {}", z.nrows(), x.nrows()),
        ));
    }
    check_rows(op, z.nrows())
}

fn squared_distances(data: &ArrayView2<f64>) -> Array2<f64> {
    let n = data.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        let ri = data.row(i);
        for j in (i + 1)..n {
            let s: f64 = ri
                .iter()
                .zip(data.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

fn median_of(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

fn median_from_squared(d2: &Array2<f64>) -> f64 {
    let n = d2.nrows();
    let distances: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d2[[i, j]].sqrt())
        .filter(|&d| d > 0.0)
        .collect();
    median_of(distances).unwrap_or(1.0)
}

/// Median of the nonzero pairwise Euclidean distances; `1.0` if every pair
/// coincides.
pub fn median_bandwidth(data: ArrayView2<f64>) -> Result<f64> {
    check_rows("median_bandwidth", data.nrows())?;
    Ok(median_from_squared(&squared_distances(&data)))
}

/// RBF Gram matrix at a fixed bandwidth.
pub fn rbf_gram(data: ArrayView2<f64>, bandwidth: f64) -> Array2<f64> {
    let scale = -0.5 / (bandwidth * bandwidth);
    squared_distances(&data).mapv_into(|d| (d * scale).exp())
}

/// `H M H` for a symmetric `M`.
fn double_center(m: &Array2<f64>) -> Array2<f64> {
    let row_means = m.mean_axis(Axis(1)).expect("non-empty");
    let col_means = m.mean_axis(Axis(0)).expect("non-empty");
    let grand = row_means.mean().expect("non-empty");
    let mut out = m.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v += grand - row_means[i] - col_means[j];
    }
    out
}

/// Value of the estimator together with the bandwidths it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsicValue {
    /// Clamped to be nonnegative.
    pub value: f64,
    /// Before clamping.
    pub raw: f64,
    pub bandwidth_z: f64,
    pub bandwidth_x: f64,
}

/// Precomputed centered Gram matrix of one side, reusable across many
/// partners (for example the fixed context side during a permutation test).
#[derive(Debug, Clone)]
pub struct CenteredGram {
    centered: Array2<f64>,
    bandwidth: f64,
}

impl CenteredGram {
    pub fn new(data: ArrayView2<f64>, bandwidth: Option<f64>) -> Result<Self> {
        check_rows("hsic", data.nrows())?;
        let d2 = squared_distances(&data);
        let bandwidth = bandwidth.unwrap_or_else(|| median_from_squared(&d2));
        let scale = -0.5 / (bandwidth * bandwidth);
        let gram = d2.mapv_into(|d| (d * scale).exp());
        Ok(Self {
            centered: double_center(&gram),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.centered.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `tr(K H L H)/(n−1)²` against an uncentered Gram `K`, optionally
    /// permuting the rows and columns of this side.
    fn statistic(&self, gram: &Array2<f64>, perm: Option<&[usize]>) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            let pi = perm.map_or(i, |p| p[i]);
            for j in 0..n {
                let pj = perm.map_or(j, |p| p[j]);
                acc += gram[[i, j]] * self.centered[[pi, pj]];
            }
        }
        acc / ((n - 1) as f64).powi(2)
    }
}

/// HSIC with median-heuristic bandwidths.
pub fn hsic(z: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<f64> {
    Ok(hsic_detailed(z, x, None, None)?.value)
}

/// HSIC with optional fixed bandwidths (`None` selects the median heuristic).
pub fn hsic_detailed(
    z: ArrayView2<f64>,
    x: ArrayView2<f64>,
    bandwidth_z: Option<f64>,
    bandwidth_x: Option<f64>,
) -> Result<HsicValue> {
    check_pair("hsic", &z, &x)?;
    let bz = bandwidth_z.unwrap_or(median_bandwidth(z)?);
    let lx = CenteredGram::new(x, bandwidth_x)?;
    let raw = lx.statistic(&rbf_gram(z, bz), None);
    Ok(HsicValue {
        value: raw.max(0.0),
        raw,
        bandwidth_z: bz,
        bandwidth_x: lx.bandwidth,
    })
}

/// ∂HSIC/∂Z with both bandwidths held at their median-heuristic values.
pub fn hsic_grad(z: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    hsic_grad_with_bandwidths(z, x, None, None)
}

/// ∂HSIC/∂Z holding `X` and both bandwidths fixed.
///
/// With `M = K ∘ (H L H)`, row `i` of the gradient is
/// `−2/(σ_z² (n−1)²) · Σ_j M_ij (z_i − z_j)`.
pub fn hsic_grad_with_bandwidths(
    z: ArrayView2<f64>,
    x: ArrayView2<f64>,
    bandwidth_z: Option<f64>,
    bandwidth_x: Option<f64>,
) -> Result<Array2<f64>> {
    check_pair("hsic_grad", &z, &x)?;
    let bz = bandwidth_z.unwrap_or(median_bandwidth(z)?);
    let lx = CenteredGram::new(x, bandwidth_x)?;
    Ok(grad_from_parts(&z, &rbf_gram(z, bz), &lx.centered, bz))
}

fn grad_from_parts(z: &ArrayView2<f64>, k: &Array2<f64>, lc: &Array2<f64>, bz: f64) -> Array2<f64> {
    let n = z.nrows();
    let m = k * lc;
    let row_sums = m.sum_axis(Axis(1));
    let mz = m.dot(z);
    let coef = -2.0 / (bz * bz * ((n - 1) as f64).powi(2));
    let mut grad = Array2::zeros(z.dim());
    for i in 0..n {
        for c in 0..z.ncols() {
            grad[[i, c]] = coef * (row_sums[i] * z[[i, c]] - mz[[i, c]]);
        }
    }
    grad
}

/// HSIC value and its gradient in one pass, sharing the Gram matrices.
pub fn hsic_with_grad(z: ArrayView2<f64>, x: ArrayView2<f64>) -> Result<(HsicValue, Array2<f64>)> {
    check_pair("hsic", &z, &x)?;
    let bz = median_bandwidth(z)?;
    let lx = CenteredGram::new(x, None)?;
    let k = rbf_gram(z, bz);
    let raw = lx.statistic(&k, None);
    let grad = grad_from_parts(&z, &k, &lx.centered, bz);
    Ok((
        HsicValue {
            value: raw.max(0.0),
            raw,
            bandwidth_z: bz,
            bandwidth_x: lx.bandwidth,
        },
        grad,
    ))
}

/// Result of a permutation test of independence.
#[derive(Debug, Clone)]
pub struct PermutationTest {
    pub statistic: f64,
    /// Sorted ascending.
    pub null: Vec<f64>,
}

impl PermutationTest {
    /// Empirical `q`-quantile of the null distribution (nearest rank).
    pub fn null_quantile(&self, q: f64) -> f64 {
        let n = self.null.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        self.null[rank - 1]
    }

    /// Whether the observed statistic exceeds the null `q`-quantile.
    pub fn rejects_at(&self, q: f64) -> bool {
        self.statistic > self.null_quantile(q)
    }
}

/// Compares `HSIC(Z, X)` against `permutations` draws of `HSIC(Z, πX)`.
pub fn permutation_test(
    z: ArrayView2<f64>,
    x: ArrayView2<f64>,
    permutations: usize,
    rng: &mut RandomStream,
) -> Result<PermutationTest> {
    check_pair("permutation_test", &z, &x)?;
    if permutations == 0 {
        return Err(Error::Config(
            "permutation test needs at least one permutation".into(),
        ));
    }
    let k = rbf_gram(z, median_bandwidth(z)?);
    let lx = CenteredGram::new(x, None)?;
    let statistic = lx.statistic(&k, None);
    let mut perm: Vec<usize> = (0..z.nrows()).collect();
    let mut null: Vec<f64> = (0..permutations)
        .map(|_| {
            rng.shuffle(&mut perm);
            lx.statistic(&k, Some(&perm))
        })
        .collect();
    null.sort_by(f64::total_cmp);
    Ok(PermutationTest { statistic, null })
}
