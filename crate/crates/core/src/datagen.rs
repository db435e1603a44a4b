//! Synthetic multi-actor, multi-label open-set data.
//!
//! Classes are split into three disjoint subsets `Z₁, Z₂, Z₃` of equal size.
//! Training actors carry labels from `Z₁ ∪ Z₂`. Test actors carry labels
//! from `Z₂` only (known, novelty 0) or from `Z₃` only (novel, novelty 1).
//!
//! Each feature vector is a content block followed by a context block of
//! `context_channels × context_window` entries laid out channel by channel.
//! Content is the mean of the label prototypes plus Gaussian noise. With
//! probability `ρ` the context repeats the bias prototype of one of the
//! actor's own labels in training, and of an unrelated known class at test
//! time; otherwise it is noise only.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::beta_evidential::LabelMatrix;
use crate::error::{Error, Result};
use crate::model::ContextPooling;
use crate::numerics::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub classes_per_subset: usize,
    pub samples_train: usize,
    pub samples_test: usize,
    pub min_labels_per_actor: usize,
    pub max_labels_per_actor: usize,
    pub noise_sigma: f64,
    /// Probability `ρ` that an actor's context carries a bias prototype.
    pub bias_strength: f64,
    pub content_dim: usize,
    pub context_channels: usize,
    pub context_window: usize,
    /// Orthonormalise the content prototypes (needs `content_dim` at least
    /// the number of classes).
    pub orthogonal_prototypes: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            classes_per_subset: 6,
            samples_train: 4000,
            samples_test: 1000,
            min_labels_per_actor: 1,
            max_labels_per_actor: 3,
            noise_sigma: 0.1,
            bias_strength: 0.9,
            content_dim: 24,
            context_channels: 2,
            context_window: 4,
            orthogonal_prototypes: true,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("classes_per_subset", self.classes_per_subset),
            ("samples_train", self.samples_train),
            ("samples_test", self.samples_test),
            ("min_labels_per_actor", self.min_labels_per_actor),
            ("max_labels_per_actor", self.max_labels_per_actor),
            ("content_dim", self.content_dim),
            ("context_channels", self.context_channels),
            ("context_window", self.context_window),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.min_labels_per_actor > self.max_labels_per_actor {
            return Err(Error::Config(format!(
                "min_labels_per_actor {} exceeds max_labels_per_actor {}",
                self.min_labels_per_actor, self.max_labels_per_actor
            )));
        }
        if self.max_labels_per_actor > self.classes_per_subset {
            return Err(Error::Config(format!(
                "max_labels_per_actor {} exceeds the {} classes of a test subset",
                self.max_labels_per_actor, self.classes_per_subset
            )));
        }
        if self.orthogonal_prototypes && self.content_dim < self.num_classes() {
            return Err(Error::Config(format!(
                "orthogonal prototypes need content_dim >= {} classes, got {}",
                self.num_classes(),
                self.content_dim
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.bias_strength) {
            return Err(Error::Config(format!(
                "bias_strength must lie in [0, 1], got {}",
                self.bias_strength
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        3 * self.classes_per_subset
    }

    pub fn context_dim(&self) -> usize {
        self.context_channels * self.context_window
    }

    pub fn feature_dim(&self) -> usize {
        self.content_dim + self.context_dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSample {
    pub features: Vec<f64>,
    /// Multi-hot over all generated classes.
    pub labels: Vec<u8>,
    pub novelty: u8,
    pub split: Split,
}

impl ActorSample {
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetadata {
    pub z1: Vec<usize>,
    pub z2: Vec<usize>,
    pub z3: Vec<usize>,
    pub content_dim: usize,
    pub context_channels: usize,
    pub context_window: usize,
    pub content_prototypes: Vec<Vec<f64>>,
    pub bias_prototypes: Vec<Vec<f64>>,
}

impl ClassMetadata {
    pub fn num_classes(&self) -> usize {
        self.z1.len() + self.z2.len() + self.z3.len()
    }

    /// `Z₁ ∪ Z₂`, the classes a model is trained on, in model output order.
    pub fn known_classes(&self) -> Vec<usize> {
        self.z1.iter().chain(&self.z2).copied().collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.content_dim + self.context_channels * self.context_window
    }

    /// Pooling of the context block, one group per channel.
    pub fn pooling(&self) -> ContextPooling {
        let cols = (self.content_dim..self.feature_dim()).collect();
        ContextPooling::grouped(cols, self.context_channels)
            .expect("channels divide the context block")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<ActorSample>,
    pub test: Vec<ActorSample>,
    pub metadata: ClassMetadata,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[ActorSample] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn features(&self, split: Split) -> Array2<f64> {
        feature_matrix(self.split(split), self.metadata.feature_dim())
    }

    /// Multi-hot labels restricted to the known classes.
    pub fn known_labels(&self, split: Split) -> LabelMatrix {
        let known = self.metadata.known_classes();
        let rows: Vec<Vec<u8>> = self
            .split(split)
            .iter()
            .map(|s| known.iter().map(|&c| s.labels[c]).collect())
            .collect();
        LabelMatrix::from_rows(&rows).expect("labels are binary")
    }

    pub fn novelty(&self, split: Split) -> Vec<u8> {
        self.split(split).iter().map(|s| s.novelty).collect()
    }
}

pub fn feature_matrix(samples: &[ActorSample], dim: usize) -> Array2<f64> {
    let mut out = Array2::zeros((samples.len(), dim));
    for (mut row, s) in out.outer_iter_mut().zip(samples) {
        row.iter_mut().zip(&s.features).for_each(|(r, v)| *r = *v);
    }
    out
}

fn unit_vector(dim: usize, rng: &mut RandomStream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Modified Gram-Schmidt in place.
fn orthonormalise(vectors: &mut [Vec<f64>]) {
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
    }
}

struct Generator<'a> {
    config: &'a GenConfig,
    meta: &'a ClassMetadata,
}

impl Generator<'_> {
    fn sample(
        &self,
        pool: &[usize],
        bias_pool: Option<&[usize]>,
        novelty: u8,
        split: Split,
        rng: &mut RandomStream,
    ) -> ActorSample {
        let c = self.config;
        let k =
            c.min_labels_per_actor + rng.below(c.max_labels_per_actor - c.min_labels_per_actor + 1);
        let labels = rng.sample_without_replacement(pool, k);

        let mut features = vec![0.0; c.feature_dim()];
        for &l in &labels {
            for (f, p) in features.iter_mut().zip(&self.meta.content_prototypes[l]) {
                *f += p / k as f64;
            }
        }
        for f in &mut features[..c.content_dim] {
            *f += c.noise_sigma * rng.normal();
        }

        let biased = rng.bernoulli(c.bias_strength);
        // Draw the class even when unbiased so both branches use the stream
        // identically.
        let source = match bias_pool {
            Some(p) => p[rng.below(p.len())],
            None => labels[rng.below(labels.len())],
        };
        let context = &mut features[c.content_dim..];
        for ch in 0..c.context_channels {
            let level = if biased {
                self.meta.bias_prototypes[source][ch]
            } else {
                0.0
            };
            for w in 0..c.context_window {
                context[ch * c.context_window + w] = level + c.noise_sigma * rng.normal();
            }
        }

        let mut multi_hot = vec![0u8; self.meta.num_classes()];
        labels.iter().for_each(|&l| multi_hot[l] = 1);
        ActorSample {
            features,
            labels: multi_hot,
            novelty,
            split,
        }
    }
}

/// Generates the train and test splits; fully determined by `config.seed`.
pub fn generate_dataset(config: &GenConfig) -> Result<Dataset> {
    config.validate()?;
    let root = RandomStream::new(config.seed);
    let cps = config.classes_per_subset;
    let n_classes = config.num_classes();

    let mut proto_rng = root.child(0);
    let mut content_prototypes: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| unit_vector(config.content_dim, &mut proto_rng))
        .collect();
    if config.orthogonal_prototypes {
        orthonormalise(&mut content_prototypes);
    }
    let bias_prototypes: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| unit_vector(config.context_channels, &mut proto_rng))
        .collect();
    let metadata = ClassMetadata {
        z1: (0..cps).collect(),
        z2: (cps..2 * cps).collect(),
        z3: (2 * cps..3 * cps).collect(),
        content_dim: config.content_dim,
        context_channels: config.context_channels,
        context_window: config.context_window,
        content_prototypes,
        bias_prototypes,
    };

    let gen = Generator {
        config,
        meta: &metadata,
    };
    let known = metadata.known_classes();
    let train_root = root.child(1);
    let train = (0..config.samples_train)
        .map(|i| {
            gen.sample(
                &known,
                None,
                0,
                Split::Train,
                &mut train_root.child(i as u64),
            )
        })
        .collect();
    let test_root = root.child(2);
    let test = (0..config.samples_test)
        .map(|i| {
            let mut rng = test_root.child(i as u64);
            if i % 2 == 0 {
                gen.sample(&metadata.z2, Some(&known), 0, Split::Test, &mut rng)
            } else {
                gen.sample(&metadata.z3, Some(&known), 1, Split::Test, &mut rng)
            }
        })
        .collect();
    Ok(Dataset {
        train,
        test,
        metadata,
    })
}

/// Number of actors per label count.
pub fn label_cardinality_histogram(samples: &[ActorSample]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for s in samples {
        *hist
            .entry(s.labels.iter().filter(|&&v| v != 0).count())
            .or_insert(0) += 1;
    }
    hist
}

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub classes: ClassMetadata,
    pub train_count: usize,
    pub test_count: usize,
    /// Echo of the configuration that generated the data.
    pub config: serde_json::Value,
}

/// Writes `dataset.jsonl` (train records first) and `metadata.json` into `dir`.
pub fn save_dataset(dir: &Path, dataset: &Dataset, config_echo: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(DATASET_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for s in dataset.train.iter().chain(&dataset.test) {
        serde_json::to_writer(&mut w, s).map_err(|e| Error::format(&path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let meta = DatasetMetadata {
        classes: dataset.metadata.clone(),
        train_count: dataset.train.len(),
        test_count: dataset.test.len(),
        config: config_echo,
    };
    let path = dir.join(METADATA_FILE);
    let text =
        serde_json::to_string_pretty(&meta).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetMetadata)> {
    let path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: DatasetMetadata =
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;

    let path = dir.join(DATASET_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let dim = meta.classes.feature_dim();
    let n_classes = meta.classes.num_classes();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: ActorSample = serde_json::from_str(&line)
            .map_err(|e| Error::format(&path, format!("line {}: {e}", i + 1)))?;
        if s.features.len() != dim || s.labels.len() != n_classes {
            return Err(Error::format(
                &path,
                format!(
                    "line {}: expected {dim} features and {n_classes} labels",
                    i + 1
                ),
            ));
        }
        match s.split {
            Split::Train => train.push(s),
            Split::Test => test.push(s),
        }
    }
    if train.len() != meta.train_count || test.len() != meta.test_count {
        return Err(Error::format(
            &path,
            format!(
                "found {}/{} train/test records, metadata says {}/{}",
                train.len(),
                test.len(),
                meta.train_count,
                meta.test_count
            ),
        ));
    }
    let dataset = Dataset {
        train,
        test,
        metadata: meta.classes.clone(),
    };
    Ok((dataset, meta))
}
