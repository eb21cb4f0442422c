use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig};

/// Which training procedure a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Autoencoder + clustering loss, unsupervised.
    Dec,
    /// Autoencoder + label transfer step + clustering loss.
    Dsec,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dec => "dec",
            Method::Dsec => "dsec",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dec" => Ok(Method::Dec),
            "dsec" => Ok(Method::Dsec),
            other => Err(Error::invalid(format!(
                "unknown method {other:?}, expected dec or dsec"
            ))),
        }
    }
}

/// Encoder architecture: `layer_sizes = [n_feat, h1, .., m]`, one activation per
/// encoder layer. The decoder mirrors the sizes; its hidden layers use relu and
/// its reconstruction layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub layer_sizes: Vec<usize>,
    pub corruption_sigma: f64,
    pub activations: Vec<Activation>,
}

impl EncoderSpec {
    /// Relu on every encoder layer, the embedding included.
    pub fn dsec(layer_sizes: Vec<usize>) -> Self {
        let n = layer_sizes.len().saturating_sub(1);
        Self {
            layer_sizes,
            corruption_sigma: 0.1,
            activations: vec![Activation::Relu; n],
        }
    }

    /// Relu on hidden layers, linear embedding layer.
    pub fn dec(layer_sizes: Vec<usize>) -> Self {
        let n = layer_sizes.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Linear;
        }
        Self {
            layer_sizes,
            corruption_sigma: 0.1,
            activations,
        }
    }

    pub fn for_method(method: Method, layer_sizes: Vec<usize>) -> Self {
        match method {
            Method::Dec => Self::dec(layer_sizes),
            Method::Dsec => Self::dsec(layer_sizes),
        }
    }

    /// `[13, 1000, 500, 3]`.
    pub fn full_scale(method: Method) -> Self {
        Self::for_method(method, vec![13, 1000, 500, 3])
    }

    /// `[13, 64, 32, 3]`, fast enough for tests.
    pub fn desk_scale(method: Method) -> Self {
        Self::for_method(method, vec![13, 64, 32, 3])
    }

    pub fn n_features(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.layer_sizes;
        if s.len() < 3 {
            return Err(Error::invalid(format!(
                "encoder needs input, at least one hidden layer and an embedding: got {s:?}"
            )));
        }
        if s.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be positive: {s:?}")));
        }
        if s[s.len() - 1] >= s[0] {
            return Err(Error::invalid(format!(
                "embedding dimension {} must be smaller than the feature count {}",
                s[s.len() - 1],
                s[0]
            )));
        }
        if self.activations.len() != s.len() - 1 {
            return Err(Error::invalid(format!(
                "{} activations given for {} encoder layers",
                self.activations.len(),
                s.len() - 1
            )));
        }
        if !(self.corruption_sigma >= 0.0) || !self.corruption_sigma.is_finite() {
            return Err(Error::invalid("corruption_sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSchedule {
    pub pretrain_epochs: usize,
    pub transfer_epochs: usize,
    pub cluster_epochs: usize,
    pub adam: AdamConfig,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Student's t degrees of freedom in the soft assignment.
    pub alpha: f64,
    /// Stop clustering early once fewer than this fraction of hard
    /// assignments change between target refreshes. `None` runs every epoch.
    pub early_stop_fraction: Option<f64>,
    /// Lloyd restarts for the centroid initialization.
    pub kmeans_restarts: usize,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            pretrain_epochs: 50,
            transfer_epochs: 10,
            cluster_epochs: 200,
            adam: AdamConfig::default(),
            batch_size: Some(256),
            alpha: 1.0,
            early_stop_fraction: None,
            kmeans_restarts: 10,
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.pretrain_epochs == 0 || self.transfer_epochs == 0 || self.cluster_epochs == 0 {
            return Err(Error::invalid("every phase needs at least one epoch"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::invalid("kmeans_restarts must be at least 1"));
        }
        self.adam.validate()
    }
}
