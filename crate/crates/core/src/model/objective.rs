use ndarray::{Array2, ArrayView2};

use super::network::{
    backward, forward, Architecture, ContextPooling, NetworkParams, ObjectiveSpec,
};
use crate::beta_evidential::{beta_loss, LabelMatrix, Reduction};
use crate::error::{Error, Result};
use crate::hsic::{hsic_detailed, HsicValue};
use crate::optimizer::ConstrainedObjective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub loss: f64,
    pub constraint: HsicValue,
    pub lagrangian: f64,
}

/// Loss, HSIC constraint and Lagrangian of `params` on one batch.
pub fn objective_value(
    params: &NetworkParams,
    features: ArrayView2<f64>,
    y: &LabelMatrix,
    pooling: &ContextPooling,
    spec: &ObjectiveSpec,
) -> Result<ObjectiveValue> {
    let f = forward(params, features, pooling)?;
    let loss = beta_loss(f.alpha.view(), f.beta.view(), y)?.total * spec.scale(f.len());
    let (bz, bx) = match spec.bandwidths {
        Some((bz, bx)) => (Some(bz), Some(bx)),
        None => (None, None),
    };
    let constraint = hsic_detailed(f.z.view(), f.pooled_context.view(), bz, bx)?;
    Ok(ObjectiveValue {
        loss,
        constraint,
        lagrangian: spec.lagrangian(loss, constraint.value),
    })
}

/// One minibatch viewed as a constrained objective over flat parameters:
/// `𝓛` is the Beta loss and `g` the HSIC between raw outputs and pooled
/// context.
#[derive(Debug, Clone)]
pub struct MinibatchObjective<'a> {
    architecture: &'a Architecture,
    features: Array2<f64>,
    labels: LabelMatrix,
    pooling: &'a ContextPooling,
    reduction: Reduction,
}

impl<'a> MinibatchObjective<'a> {
    pub fn new(
        architecture: &'a Architecture,
        features: Array2<f64>,
        labels: LabelMatrix,
        pooling: &'a ContextPooling,
        reduction: Reduction,
    ) -> Result<Self> {
        architecture.validate()?;
        pooling.validate(architecture.input_dim)?;
        if features.ncols() != architecture.input_dim
            || labels.ncols() != architecture.num_classes
            || labels.nrows() != features.nrows()
        {
            return Err(Error::shape(
                "MinibatchObjective",
                format!(
                    "features {:?}, labels {}x{}, network {} -> {} classes",
                    features.dim(),
                    labels.nrows(),
                    labels.ncols(),
                    architecture.input_dim,
                    architecture.num_classes
                ),
            ));
        }
        if features.nrows() < 2 {
            return Err(Error::shape(
                "MinibatchObjective",
                "a batch needs at least 2 actors",
            ));
        }
        Ok(Self {
            architecture,
            features,
            labels,
            pooling,
            reduction,
        })
    }

    fn params(&self, theta: &[f64]) -> NetworkParams {
        NetworkParams::from_flat_unchecked(self.architecture.clone(), theta)
            .expect("flat length matches the architecture")
    }

    fn value(&self, theta: &[f64]) -> ObjectiveValue {
        objective_value(
            &self.params(theta),
            self.features.view(),
            &self.labels,
            self.pooling,
            &ObjectiveSpec::loss_only(self.reduction),
        )
        .unwrap_or(ObjectiveValue {
            loss: f64::NAN,
            constraint: HsicValue {
                value: f64::NAN,
                raw: f64::NAN,
                bandwidth_z: f64::NAN,
                bandwidth_x: f64::NAN,
            },
            lagrangian: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ConstrainedObjective for MinibatchObjective<'_> {
    fn dim(&self) -> usize {
        self.architecture.num_params()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        self.value(theta).loss
    }

    fn constraint(&self, theta: &[f64]) -> f64 {
        self.value(theta).constraint.value
    }

    fn evaluate(&self, theta: &[f64]) -> (f64, f64) {
        let v = self.value(theta);
        (v.loss, v.constraint.value)
    }

    /// Non-finite parameters yield a NaN gradient, which the optimizer
    /// reports as a numeric failure.
    fn lagrangian_grad(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        let params = self.params(theta);
        forward(&params, self.features.view(), self.pooling)
            .and_then(|f| {
                backward(
                    &params,
                    &f,
                    &self.labels,
                    &ObjectiveSpec::with_lambda(lambda, self.reduction),
                )
            })
            .map(|g| g.grad)
            .unwrap_or_else(|_| vec![f64::NAN; theta.len()])
    }
}
