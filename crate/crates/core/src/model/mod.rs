//! Feed-forward evidential network `d_in → hidden… → 2K`.
//!
//! The first `K` output units feed the positive evidence `α = s(h) + 1`, the
//! last `K` the negative evidence `β`. The raw outputs `h(x; θ)` are the
//! matrix `Z` that the HSIC constraint compares against the pooled context.

mod checkpoint;
mod network;
mod objective;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use network::{
    backward, forward, Activation, Architecture, ContextPooling, EvidenceFunction, ForwardResult,
    Gradient, Layer, NetworkParams, ObjectiveSpec,
};
pub use objective::{objective_value, MinibatchObjective, ObjectiveValue};
pub use train::{
    train, train_from, write_train_trace_csv, ParamSelection, TrainConfig, TrainOutput, TrainStep,
    TrainingSet,
};
