use std::path::Path;

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::network::{forward, Architecture, ContextPooling, NetworkParams};
use super::objective::MinibatchObjective;
use crate::beta_evidential::{beta_loss, LabelMatrix, Reduction};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::optimizer::{
    algorithm1_step, norm, DualState, PrimalConfig, PrimalMode, PrimalState, DIVERGENCE_FACTOR,
};

/// Features, labels and context layout of a training set.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub features: ArrayView2<'a, f64>,
    pub labels: &'a LabelMatrix,
    pub pooling: &'a ContextPooling,
}

impl TrainingSet<'_> {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, arch: &Architecture) -> Result<()> {
        if self.features.ncols() != arch.input_dim
            || self.labels.ncols() != arch.num_classes
            || self.labels.nrows() != self.features.nrows()
        {
            return Err(Error::shape(
                "train",
                format!(
                    "features {:?} and labels {}x{} do not fit a {} -> {} class network",
                    self.features.dim(),
                    self.labels.nrows(),
                    self.labels.ncols(),
                    arch.input_dim,
                    arch.num_classes
                ),
            ));
        }
        if self.len() < 2 {
            return Err(Error::Config("training needs at least 2 actors".into()));
        }
        self.pooling.validate(arch.input_dim)
    }
}

/// Which parameters training returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSelection {
    /// The running average `θ̃`.
    #[default]
    Average,
    /// The last raw iterate.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many steps even if epochs remain.
    pub max_steps: Option<usize>,
    pub primal: PrimalConfig,
    pub eta2: f64,
    pub delta: f64,
    pub gamma: f64,
    pub lambda0: f64,
    /// With `false` the multiplier stays frozen at zero.
    pub debias: bool,
    pub reduction: Reduction,
    pub output: ParamSelection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 128,
            max_steps: None,
            primal: PrimalConfig::default(),
            eta2: 0.01,
            delta: 0.01,
            gamma: 0.001,
            lambda0: 0.0,
            debias: true,
            reduction: Reduction::Mean,
            output: ParamSelection::Average,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.primal.mode != PrimalMode::Adam {
            return Err(Error::Config(
                "network training supports only the adam primal mode".into(),
            ));
        }
        if !(self.primal.eta1.is_finite() && self.primal.eta1 > 0.0) {
            return Err(Error::Config(format!(
                "eta1 must be > 0, got {}",
                self.primal.eta1
            )));
        }
        self.dual().map(|_| ())
    }

    fn dual(&self) -> Result<DualState> {
        let lambda0 = if self.debias { self.lambda0 } else { 0.0 };
        let mut dual = DualState::new(lambda0, self.eta2, self.delta, self.gamma)?;
        dual.frozen = !self.debias;
        Ok(dual)
    }
}

/// Per-step record; loss and HSIC are measured at `θ̃` on the step's batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainStep {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub hsic: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: NetworkParams,
    pub steps: Vec<TrainStep>,
    /// Beta loss of the initial parameters on the whole training set.
    pub initial_loss: f64,
    /// Beta loss of the returned parameters on the whole training set.
    pub final_loss: f64,
}

fn full_loss(params: &NetworkParams, data: &TrainingSet, reduction: Reduction) -> Result<f64> {
    let f = forward(params, data.features, data.pooling)?;
    Ok(beta_loss(f.alpha.view(), f.beta.view(), data.labels)?.total * reduction.scale(f.len()))
}

/// Trains from Glorot-initialised parameters drawn from `rng`.
pub fn train(
    architecture: &Architecture,
    config: &TrainConfig,
    data: &TrainingSet,
    rng: &RandomStream,
) -> Result<TrainOutput> {
    architecture.validate()?;
    let init = NetworkParams::glorot(architecture.clone(), &mut rng.child(0))?;
    train_from(init, config, data, &mut rng.child(1))
}

/// Runs the primal-dual average scheme over shuffled minibatches starting
/// from `init`. `rng` only drives the batch order.
pub fn train_from(
    init: NetworkParams,
    config: &TrainConfig,
    data: &TrainingSet,
    rng: &mut RandomStream,
) -> Result<TrainOutput> {
    config.validate()?;
    let arch = init.architecture().clone();
    data.validate(&arch)?;

    let theta0 = init.flatten();
    let limit = DIVERGENCE_FACTOR * norm(&theta0).max(1.0);
    let mut primal = PrimalState::new(theta0, &config.primal);
    let mut dual = config.dual()?;
    let initial_loss = full_loss(&init, data, config.reduction)?;

    let budget = config.max_steps.unwrap_or(usize::MAX);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut steps = Vec::new();
    'epochs: for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            if steps.len() >= budget {
                break 'epochs;
            }
            if batch.len() < 2 {
                continue;
            }
            let objective = MinibatchObjective::new(
                &arch,
                data.features.select(Axis(0), batch),
                data.labels.select_rows(batch),
                data.pooling,
                config.reduction,
            )?;
            let rec = algorithm1_step(&mut primal, &mut dual, &objective, &config.primal)?;
            let n = norm(&primal.iterate);
            if n > limit {
                return Err(Error::Divergence {
                    step: rec.step,
                    norm: n,
                    limit,
                });
            }
            steps.push(TrainStep {
                step: rec.step,
                epoch,
                loss: rec.loss_avg,
                hsic: rec.constraint_avg,
                lambda: rec.lambda,
            });
        }
    }

    let chosen = match config.output {
        ParamSelection::Average => primal.averaged(),
        ParamSelection::Last => &primal.iterate,
    };
    let params = NetworkParams::from_flat(arch, chosen)?;
    let final_loss = full_loss(&params, data, config.reduction)?;
    Ok(TrainOutput {
        params,
        steps,
        initial_loss,
        final_loss,
    })
}

/// Writes `step, epoch, loss, hsic, lambda` after `#`-prefixed comment lines.
pub fn write_train_trace_csv(path: &Path, steps: &[TrainStep], comments: &[String]) -> Result<()> {
    let mut w = crate::optimizer::commented_csv(path, comments)?;
    for s in steps {
        w.serialize(s)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
