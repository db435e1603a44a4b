use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::beta_evidential::{beta_loss, beta_loss_grad, LabelMatrix, Reduction};
use crate::error::{Error, Result};
use crate::hsic::{hsic_detailed, hsic_grad_with_bandwidths, HsicValue};
use crate::numerics::{sigmoid, softplus, RandomStream};
use crate::subjective_logic::{novelty_scores_raw, EvidencePair, NoveltyScores, OpinionParams};

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - post * post,
            Activation::Relu => f64::from(pre > 0.0),
        }
    }
}

/// The map `s(·)` from raw outputs to nonnegative evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceFunction {
    #[default]
    Softplus,
    Relu,
}

impl EvidenceFunction {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            EvidenceFunction::Softplus => softplus(t),
            EvidenceFunction::Relu => t.max(0.0),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            EvidenceFunction::Softplus => sigmoid(t),
            EvidenceFunction::Relu => f64::from(t > 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    pub activation: Activation,
    pub evidence: EvidenceFunction,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input_dim: 32,
            hidden: vec![64, 64],
            num_classes: 6,
            activation: Activation::default(),
            evidence: EvidenceFunction::default(),
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 || self.hidden.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be positive: input {}, hidden {:?}, classes {}",
                self.input_dim, self.hidden, self.num_classes
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        2 * self.num_classes
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden);
        widths.push(self.output_dim());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| (i + 1) * o).sum()
    }
}

/// Affine layer `a ↦ a W + b` with `W` stored `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// The network parameters `θ`.
///
/// The flat layout is layer by layer, row-major weights followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    architecture: Architecture,
    layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn zeros(architecture: Architecture) -> Result<Self> {
        architecture.validate()?;
        let layers = architecture
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer {
                weights: Array2::zeros((i, o)),
                bias: Array1::zeros(o),
            })
            .collect();
        Ok(Self {
            architecture,
            layers,
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot(architecture: Architecture, rng: &mut RandomStream) -> Result<Self> {
        let mut params = Self::zeros(architecture)?;
        for layer in &mut params.layers {
            let (fan_in, fan_out) = layer.weights.dim();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            layer
                .weights
                .mapv_inplace(|_| rng.uniform_range(-limit, limit));
        }
        Ok(params)
    }

    /// Rebuilds parameters from a flat vector, rejecting non-finite entries.
    pub fn from_flat(architecture: Architecture, flat: &[f64]) -> Result<Self> {
        if let Some(v) = flat.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(
                "NetworkParams::from_flat",
                format!("non-finite parameter {v}"),
            ));
        }
        Self::from_flat_unchecked(architecture, flat)
    }

    pub(crate) fn from_flat_unchecked(architecture: Architecture, flat: &[f64]) -> Result<Self> {
        let mut params = Self::zeros(architecture)?;
        params.set_flat(flat)?;
        Ok(params)
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.architecture.num_params();
        if flat.len() != expected {
            return Err(Error::shape(
                "NetworkParams::set_flat",
                format!("got {} values, architecture needs {expected}", flat.len()),
            ));
        }
        let mut rest = flat;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            let nb = layer.bias.len();
            layer
                .weights
                .iter_mut()
                .zip(&rest[..nw])
                .for_each(|(w, v)| *w = *v);
            layer
                .bias
                .iter_mut()
                .zip(&rest[nw..nw + nb])
                .for_each(|(b, v)| *b = *v);
            rest = &rest[nw + nb..];
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.architecture.num_params());
        for layer in &self.layers {
            flat.extend(layer.weights.iter());
            flat.extend(layer.bias.iter());
        }
        flat
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    fn hash_into(&self, h: &mut DefaultHasher) {
        for layer in &self.layers {
            layer
                .weights
                .iter()
                .chain(layer.bias.iter())
                .for_each(|v| h.write_u64(v.to_bits()));
        }
    }
}

/// Which feature columns hold the context block and how they pool.
///
/// The columns are split into `groups` contiguous runs of equal length and
/// each run is averaged, giving an `n × groups` pooled matrix. One group is a
/// plain per-sample mean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPooling {
    pub columns: Vec<usize>,
    pub groups: usize,
}

impl ContextPooling {
    pub fn mean(columns: Vec<usize>) -> Self {
        Self { columns, groups: 1 }
    }

    pub fn grouped(columns: Vec<usize>, groups: usize) -> Result<Self> {
        let p = Self { columns, groups };
        if p.groups == 0 || p.columns.is_empty() || !p.columns.len().is_multiple_of(p.groups) {
            return Err(Error::Config(format!(
                "{} context columns cannot be split into {} equal groups",
                p.columns.len(),
                p.groups
            )));
        }
        Ok(p)
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        Self::grouped(self.columns.clone(), self.groups)?;
        if let Some(c) = self.columns.iter().find(|&&c| c >= input_dim) {
            return Err(Error::shape(
                "ContextPooling",
                format!("context column {c} outside {input_dim} feature columns"),
            ));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.groups
    }

    pub fn pool(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.validate(features.ncols())?;
        let width = self.columns.len() / self.groups;
        let mut out = Array2::zeros((features.nrows(), self.groups));
        for (row, mut pooled) in features.outer_iter().zip(out.outer_iter_mut()) {
            for (g, chunk) in self.columns.chunks(width).enumerate() {
                pooled[g] = chunk.iter().map(|&c| row[c]).sum::<f64>() / width as f64;
            }
        }
        Ok(out)
    }
}

/// Output of [`forward`] plus the cache [`backward`] needs.
#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    /// Raw outputs `h(x; θ)`, `n × 2K`.
    pub z: Array2<f64>,
    pub pooled_context: Array2<f64>,
    /// Input of every layer; entry 0 is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    fingerprint: u64,
}

impl ForwardResult {
    pub fn len(&self) -> usize {
        self.z.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hash of the parameters and batch that produced this result.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn evidence_pairs(&self) -> Vec<EvidencePair> {
        self.alpha
            .outer_iter()
            .zip(self.beta.outer_iter())
            .map(|(a, b)| {
                EvidencePair::new(a.to_vec(), b.to_vec()).expect("evidence is at least one")
            })
            .collect()
    }

    pub fn novelty_scores(&self, params: OpinionParams) -> Vec<NoveltyScores> {
        self.alpha
            .outer_iter()
            .zip(self.beta.outer_iter())
            .map(|(a, b)| novelty_scores_raw(&a.to_vec(), &b.to_vec(), params))
            .collect()
    }

    pub fn min_evidence(&self) -> f64 {
        self.alpha
            .iter()
            .chain(self.beta.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn fingerprint(params: &NetworkParams, batch: &ArrayView2<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    params.hash_into(&mut h);
    h.write_usize(batch.nrows());
    h.write_usize(batch.ncols());
    batch.iter().for_each(|v| h.write_u64(v.to_bits()));
    h.finish()
}

/// Deterministic forward pass over an `n × d_in` batch.
pub fn forward(
    params: &NetworkParams,
    features: ArrayView2<f64>,
    pooling: &ContextPooling,
) -> Result<ForwardResult> {
    let arch = &params.architecture;
    if features.ncols() != arch.input_dim {
        return Err(Error::shape(
            "forward",
            format!(
                "features have {} columns, network expects {}",
                features.ncols(),
                arch.input_dim
            ),
        ));
    }
    let pooled_context = pooling.pool(features)?;

    let depth = params.layers.len();
    let mut inputs = Vec::with_capacity(depth);
    let mut pre = Vec::with_capacity(depth - 1);
    let mut current = features.to_owned();
    for layer in &params.layers[..depth - 1] {
        let h = current.dot(&layer.weights) + &layer.bias;
        let a = h.mapv(|v| arch.activation.apply(v));
        inputs.push(std::mem::replace(&mut current, a));
        pre.push(h);
    }
    let last = &params.layers[depth - 1];
    let z = current.dot(&last.weights) + &last.bias;
    inputs.push(current);

    let k = arch.num_classes;
    let s = arch.evidence;
    let alpha = z.slice(s![.., ..k]).mapv(|t| s.apply(t) + 1.0);
    let beta = z.slice(s![.., k..]).mapv(|t| s.apply(t) + 1.0);
    Ok(ForwardResult {
        alpha,
        beta,
        z,
        pooled_context,
        fingerprint: fingerprint(params, &features),
        inputs,
        pre,
    })
}

/// Terms of the batch Lagrangian `𝓛(θ) + λ (HSIC(Z, σ(X)) − γ) − (δ/2) λ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
    pub reduction: Reduction,
    /// `(σ_Z, σ_X)`; `None` picks both by the median heuristic.
    pub bandwidths: Option<(f64, f64)>,
}

impl ObjectiveSpec {
    pub fn loss_only(reduction: Reduction) -> Self {
        Self {
            lambda: 0.0,
            gamma: 0.0,
            delta: 0.0,
            reduction,
            bandwidths: None,
        }
    }

    pub fn with_lambda(lambda: f64, reduction: Reduction) -> Self {
        Self {
            lambda,
            ..Self::loss_only(reduction)
        }
    }

    pub(crate) fn scale(&self, n: usize) -> f64 {
        self.reduction.scale(n)
    }

    pub(crate) fn lagrangian(&self, loss: f64, constraint: f64) -> f64 {
        loss + self.lambda * (constraint - self.gamma)
            - 0.5 * self.delta * self.lambda * self.lambda
    }
}

/// Gradient over the flattened parameters together with the objective terms
/// evaluated on the same pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub grad: Vec<f64>,
    pub loss: f64,
    /// Present when `λ ≠ 0`; the constraint is skipped otherwise.
    pub constraint: Option<HsicValue>,
    pub lagrangian: f64,
}

/// Gradient of the batch Lagrangian with respect to all parameters.
pub fn backward(
    params: &NetworkParams,
    cache: &ForwardResult,
    y: &LabelMatrix,
    spec: &ObjectiveSpec,
) -> Result<Gradient> {
    if y.nrows() != cache.len() {
        return Err(Error::shape(
            "backward",
            format!("{} label rows for a batch of {}", y.nrows(), cache.len()),
        ));
    }
    if fingerprint(params, &cache.inputs[0].view()) != cache.fingerprint {
        return Err(Error::StaleCache(
            "parameters changed since the forward pass".into(),
        ));
    }
    let arch = &params.architecture;
    let k = arch.num_classes;
    let n = cache.len();
    let scale = spec.scale(n);

    let loss = beta_loss(cache.alpha.view(), cache.beta.view(), y)?.total * scale;
    let (d_alpha, d_beta) = beta_loss_grad(cache.alpha.view(), cache.beta.view(), y)?;
    let mut dz = Array2::zeros(cache.z.dim());
    for i in 0..n {
        for c in 0..k {
            dz[[i, c]] = scale * d_alpha[[i, c]] * arch.evidence.derivative(cache.z[[i, c]]);
            dz[[i, k + c]] = scale * d_beta[[i, c]] * arch.evidence.derivative(cache.z[[i, k + c]]);
        }
    }

    let constraint = if spec.lambda != 0.0 {
        let (bz, bx) = match spec.bandwidths {
            Some((bz, bx)) => (Some(bz), Some(bx)),
            None => (None, None),
        };
        let value = hsic_detailed(cache.z.view(), cache.pooled_context.view(), bz, bx)?;
        let g = hsic_grad_with_bandwidths(
            cache.z.view(),
            cache.pooled_context.view(),
            Some(value.bandwidth_z),
            Some(value.bandwidth_x),
        )?;
        dz.scaled_add(spec.lambda, &g);
        Some(value)
    } else {
        None
    };
    let lagrangian = spec.lagrangian(loss, constraint.map_or(0.0, |c| c.value));

    let depth = params.layers.len();
    let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(depth);
    let mut delta = dz;
    for l in (0..depth).rev() {
        let layer = &params.layers[l];
        let input = &cache.inputs[l];
        grads.push((input.t().dot(&delta), delta.sum_axis(Axis(0))));
        if l > 0 {
            let mut upstream = delta.dot(&layer.weights.t());
            let pre = &cache.pre[l - 1];
            ndarray::Zip::from(&mut upstream)
                .and(pre)
                .and(input)
                .for_each(|d, &h, &a| *d *= arch.activation.derivative(h, a));
            delta = upstream;
        }
    }

    let mut grad = Vec::with_capacity(arch.num_params());
    for (w, b) in grads.iter().rev() {
        grad.extend(w.iter());
        grad.extend(b.iter());
    }
    Ok(Gradient {
        grad,
        loss,
        constraint,
        lagrangian,
    })
}
