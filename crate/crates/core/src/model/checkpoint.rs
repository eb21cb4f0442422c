//! Versioned model checkpoints.
//!
//! A checkpoint is a UTF-8 JSON document:
//!
//! ```text
//! {
//!   "format": "dsec-checkpoint",
//!   "version": 1,
//!   "phase": "pretrain" | "transfer" | "cluster",
//!   "fingerprint": "<config fingerprint or null>",
//!   "model": { method, autoencoder, transfer_encoder, classifier, encoder, cluster_head }
//! }
//! ```
//!
//! Every dense layer serializes its sizes, activation, trainable flag, row-major
//! weights and bias. Floats are written in shortest round-trip form and parsed
//! exactly, so a load reproduces every weight bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TrainedModel;

pub const CHECKPOINT_FORMAT: &str = "dsec-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Transfer,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub phase: Phase,
    pub fingerprint: Option<String>,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(model: TrainedModel, phase: Phase, fingerprint: Option<String>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            phase,
            fingerprint,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (this build reads {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
