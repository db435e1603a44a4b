use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Architecture, ContextPooling, NetworkParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "osr-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON container for trained parameters. Floats are written in shortest
/// round-trip form, so save followed by load is lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub pooling: ContextPooling,
    pub weights: Vec<f64>,
    /// Configuration echo of the run that produced the weights.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn new(
        params: &NetworkParams,
        pooling: &ContextPooling,
        config: serde_json::Value,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: params.architecture().clone(),
            pooling: pooling.clone(),
            weights: params.flatten(),
            config,
        }
    }

    pub fn params(&self) -> Result<NetworkParams> {
        NetworkParams::from_flat(self.architecture.clone(), &self.weights)
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let text =
        serde_json::to_string_pretty(checkpoint).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!(
                "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                ck.format, ck.version
            ),
        ));
    }
    ck.pooling.validate(ck.architecture.input_dim)?;
    ck.params()?;
    Ok(ck)
}
