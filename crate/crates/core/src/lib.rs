//! Multi-label evidential learning for open-set recognition.
//!
//! Beta evidence per class, subjective-logic novelty scores, an HSIC
//! dependence penalty on the evidence, and a primal-dual averaging optimizer
//! for the resulting constrained problem.

pub mod beta_evidential;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod hsic;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod subjective_logic;

pub use beta_evidential::{beta_loss, beta_loss_grad, LabelMatrix, Reduction};
pub use error::{Error, Result};
pub use numerics::RandomStream;
pub use subjective_logic::{
    novelty_scores, EvidencePair, Mechanism, NoveltyScores, Opinion, OpinionParams,
};
