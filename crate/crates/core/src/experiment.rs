//! End-to-end experiment configuration and the generate / train / evaluate
//! steps that the command-line front end wires together.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::datagen::{generate_dataset, Dataset, GenConfig, Split};
use crate::error::{Error, Result};
use crate::hsic::hsic;
use crate::metrics::{binary_curve_metrics, mean_ap, MechanismRow, ScoredSet};
use crate::model::{
    forward, train, Activation, Architecture, ContextPooling, EvidenceFunction, NetworkParams,
    TrainConfig, TrainOutput, TrainingSet,
};
use crate::numerics::RandomStream;
use crate::subjective_logic::{Mechanism, Opinion, OpinionParams};

/// Network shape; input width and class count come from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub evidence: EvidenceFunction,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let arch = Architecture::default();
        Self {
            hidden: arch.hidden,
            activation: arch.activation,
            evidence: arch.evidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mechanisms: Vec<Mechanism>,
    pub opinion: OpinionParams,
    /// Actors per forward pass.
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mechanisms: Mechanism::ALL.to_vec(),
            opinion: OpinionParams::default(),
            batch_size: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream; the data seed is derived from it.
    pub seed: u64,
    pub data: GenConfig,
    pub model: ModelConfig,
    pub optimizer: TrainConfig,
    pub eval: EvalConfig,
}

/// The biased open-set benchmark: 6 classes per subset, `ρ = 0.9`, 4000
/// train and 1000 test actors, trained with the multiplier active.
impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut optimizer = TrainConfig {
            epochs: 16,
            eta2: 100.0,
            delta: 1e-3,
            ..TrainConfig::default()
        };
        optimizer.primal.eta1 = 3e-3;
        optimizer.primal.reset_to_average = false;
        Self {
            seed: 0,
            data: GenConfig::default(),
            model: ModelConfig::default(),
            optimizer,
            eval: EvalConfig::default(),
        }
    }
}

const DATA_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;

impl ExperimentConfig {
    /// Copy with the data seed derived from the root seed.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.data.seed = RandomStream::new(self.seed).child(DATA_STREAM).seed();
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.architecture().validate()?;
        self.optimizer.validate()?;
        self.eval.opinion.validate()?;
        if self.eval.mechanisms.is_empty() {
            return Err(Error::Config("eval.mechanisms must not be empty".into()));
        }
        if self.eval.batch_size == 0 {
            return Err(Error::Config("eval.batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.data.feature_dim(),
            hidden: self.model.hidden.clone(),
            num_classes: 2 * self.data.classes_per_subset,
            activation: self.model.activation,
            evidence: self.model.evidence,
        }
    }

    pub fn train_stream(&self) -> RandomStream {
        RandomStream::new(self.seed).child(TRAIN_STREAM)
    }
}

pub fn generate(config: &ExperimentConfig) -> Result<Dataset> {
    generate_dataset(&config.resolved().data)
}

/// Trains on the training split of `dataset`.
pub fn train_on(config: &ExperimentConfig, dataset: &Dataset) -> Result<TrainOutput> {
    let arch = config.architecture();
    if arch.input_dim != dataset.metadata.feature_dim()
        || arch.num_classes != dataset.metadata.known_classes().len()
    {
        return Err(Error::Config(format!(
            "dataset has {} features and {} known classes, configuration expects {} and {}",
            dataset.metadata.feature_dim(),
            dataset.metadata.known_classes().len(),
            arch.input_dim,
            arch.num_classes
        )));
    }
    let features = dataset.features(Split::Train);
    let labels = dataset.known_labels(Split::Train);
    let pooling = dataset.metadata.pooling();
    let data = TrainingSet {
        features: features.view(),
        labels: &labels,
        pooling: &pooling,
    };
    train(&arch, &config.optimizer, &data, &config.train_stream())
}

/// Per-actor outputs of a network over a whole split.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub z: Array2<f64>,
    pub pooled_context: Array2<f64>,
}

pub fn predict(
    params: &NetworkParams,
    features: ArrayView2<f64>,
    pooling: &ContextPooling,
    batch_size: usize,
) -> Result<Predictions> {
    let n = features.nrows();
    let k = params.architecture().num_classes;
    let mut out = Predictions {
        alpha: Array2::zeros((n, k)),
        beta: Array2::zeros((n, k)),
        z: Array2::zeros((n, 2 * k)),
        pooled_context: Array2::zeros((n, pooling.output_dim())),
    };
    for start in (0..n).step_by(batch_size.max(1)) {
        let end = (start + batch_size).min(n);
        let rows = ndarray::s![start..end, ..];
        let f = forward(params, features.slice(rows), pooling)?;
        out.alpha.slice_mut(rows).assign(&f.alpha);
        out.beta.slice_mut(rows).assign(&f.beta);
        out.z.slice_mut(rows).assign(&f.z);
        out.pooled_context.slice_mut(rows).assign(&f.pooled_context);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<MechanismRow>,
    /// Closed-set mAP over known test actors, from `p = b + a·u`.
    pub map: f64,
    /// HSIC between raw outputs and pooled context on the test split.
    pub test_hsic: f64,
    pub num_test: usize,
    pub num_novel: usize,
}

impl EvalReport {
    pub fn row(&self, mechanism: Mechanism) -> Option<&MechanismRow> {
        self.rows.iter().find(|r| r.mechanism == mechanism)
    }
}

/// Scores every test actor and computes the open-set table, closed-set mAP
/// and the test HSIC.
pub fn evaluate(
    params: &NetworkParams,
    pooling: &ContextPooling,
    dataset: &Dataset,
    eval: &EvalConfig,
) -> Result<EvalReport> {
    let features = dataset.features(Split::Test);
    let pred = predict(params, features.view(), pooling, eval.batch_size)?;
    let novelty = dataset.novelty(Split::Test);

    let scores: Vec<_> = pred
        .alpha
        .outer_iter()
        .zip(pred.beta.outer_iter())
        .map(|(a, b)| {
            crate::subjective_logic::novelty_scores_raw(&a.to_vec(), &b.to_vec(), eval.opinion)
        })
        .collect();
    let rows = eval
        .mechanisms
        .iter()
        .map(|&m| {
            let set = ScoredSet::new(scores.iter().map(|s| s.get(m)).collect(), novelty.clone())?;
            Ok(MechanismRow::new(m, &binary_curve_metrics(&set)))
        })
        .collect::<Result<Vec<_>>>()?;

    let known: Vec<usize> = (0..novelty.len()).filter(|&i| novelty[i] == 0).collect();
    let labels = dataset.known_labels(Split::Test).select_rows(&known);
    let mut prob = Array2::zeros((known.len(), pred.alpha.ncols()));
    for (r, &i) in known.iter().enumerate() {
        for c in 0..pred.alpha.ncols() {
            prob[[r, c]] =
                Opinion::from_evidence(pred.alpha[[i, c]], pred.beta[[i, c]], eval.opinion)?
                    .expected_probability();
        }
    }
    let map = mean_ap(prob.view(), labels.view())?.map;
    let test_hsic = hsic(pred.z.view(), pred.pooled_context.view())?;

    Ok(EvalReport {
        rows,
        map,
        test_hsic,
        num_test: novelty.len(),
        num_novel: novelty.iter().filter(|&&v| v == 1).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 3}"#).is_err());
    }

    #[test]
    fn data_seed_follows_root_seed() {
        let a = ExperimentConfig {
            seed: 1,
            ..Default::default()
        }
        .resolved();
        let b = ExperimentConfig {
            seed: 2,
            ..Default::default()
        }
        .resolved();
        assert_ne!(a.data.seed, b.data.seed);
        assert_eq!(a.data.seed, a.resolved().data.seed);
    }

    #[test]
    fn architecture_tracks_data() {
        let cfg = ExperimentConfig::default();
        let arch = cfg.architecture();
        assert_eq!(arch.input_dim, 32);
        assert_eq!(arch.num_classes, 12);
        cfg.validate().unwrap();
    }
}
