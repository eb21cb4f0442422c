//! Encoder/decoder construction and de-noising pretraining.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EncoderSpec, TrainingSchedule};
use crate::nn::{
    epoch_batches, gaussian_corrupt, loss_and_grad, Activation, AdamState, DenseLayer, LossKind, Matrix, Network,
};
use crate::rng::Rng;

/// The mapping `f_θ : X^n → Z^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub network: Network,
    pub spec: EncoderSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: EncoderModel,
    pub decoder: Network,
}

impl EncoderModel {
    pub fn new(spec: &EncoderSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .zip(&spec.activations)
            .map(|(w, &act)| DenseLayer::he_uniform(w[0], w[1], act, rng))
            .collect();
        Ok(Self {
            network: Network::new(layers)?,
            spec: spec.clone(),
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.network.out_dim()
    }

    /// Maps rows to the embedding without corruption.
    pub fn encode(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.network.in_dim() {
            return Err(Error::shape(
                "encode",
                data.shape(),
                (self.network.in_dim(), self.network.out_dim()),
            ));
        }
        self.network.forward(data)
    }
}

impl AutoencoderModel {
    /// Encoder from `spec` and a mirrored decoder: relu hidden layers and a
    /// zero-initialized linear reconstruction layer.
    pub fn new(spec: &EncoderSpec, rng: &mut Rng) -> Result<Self> {
        let encoder = EncoderModel::new(spec, rng)?;
        let rev: Vec<usize> = spec.layer_sizes.iter().rev().copied().collect();
        let n = rev.len() - 1;
        let decoder_layers = rev
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i + 1 == n {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                DenseLayer::he_uniform(w[0], w[1], act, rng)
            })
            .collect();
        let mut decoder = Network::new(decoder_layers)?;
        // An untrained decoder only adds noise to the reconstruction, and the
        // cheapest way to remove it is to silence a relu bottleneck for good.
        // Starting the output layer at zero removes that pull.
        let last = decoder.layers.last_mut().expect("at least one layer");
        last.weights = Matrix::zeros(last.weights.rows(), last.weights.cols());
        Ok(Self { encoder, decoder })
    }

    pub fn reconstruct(&self, data: &Matrix) -> Result<Matrix> {
        self.decoder.forward(&self.encoder.encode(data)?)
    }
}

/// Trains the autoencoder to reconstruct clean inputs from Gaussian-corrupted
/// ones. Returns the model and the per-epoch mean training loss.
pub fn pretrain_autoencoder(
    data: &Matrix,
    spec: &EncoderSpec,
    loss: LossKind,
    schedule: &TrainingSchedule,
    rng: &mut Rng,
) -> Result<(AutoencoderModel, Vec<f64>)> {
    schedule.validate()?;
    if data.cols() != spec.n_features() {
        return Err(Error::shape(
            "pretrain_autoencoder",
            data.shape(),
            (spec.n_features(), 0),
        ));
    }
    if data.rows() == 0 {
        return Err(Error::invalid("no training rows"));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite(
            "pretraining data (impute missing values first)".into(),
        ));
    }
    let mut init_rng = rng.derive("init");
    let mut noise_rng = rng.derive("noise");
    let mut batch_rng = rng.derive("batches");
    let mut model = AutoencoderModel::new(spec, &mut init_rng)?;

    let mut sizes = model.encoder.network.trainable_block_sizes();
    sizes.extend(model.decoder.trainable_block_sizes());
    let mut adam = AdamState::new(schedule.adam, &sizes)?;

    let mut history = Vec::with_capacity(schedule.pretrain_epochs);
    for epoch in 0..schedule.pretrain_epochs {
        let mut total = 0.0;
        for batch in epoch_batches(data.rows(), schedule.batch_size, &mut batch_rng) {
            let clean = data.select_rows(&batch);
            let noisy = gaussian_corrupt(&clean, spec.corruption_sigma, &mut noise_rng)?;
            let enc_trace = model.encoder.network.forward_trace(&noisy)?;
            let dec_trace = model.decoder.forward_trace(&enc_trace.output)?;
            let (l, grad) = loss_and_grad(loss, &dec_trace.output, &clean)?;
            if !l.is_finite() {
                return Err(Error::Diverged {
                    phase: "pretrain",
                    epoch,
                    loss: l,
                });
            }
            total += l * batch.len() as f64;
            let (dec_grads, grad_z) = model.decoder.backward(&dec_trace, &grad)?;
            let (enc_grads, _) = model.encoder.network.backward(&enc_trace, &grad_z)?;

            let mut grads = model.encoder.network.trainable_grad_slices(&enc_grads);
            grads.extend(model.decoder.trainable_grad_slices(&dec_grads));
            let mut params = model.encoder.network.trainable_param_slices();
            params.extend(model.decoder.trainable_param_slices());
            adam.step(&mut params, &grads)?;
        }
        let epoch_loss = total / data.rows() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                phase: "pretrain",
                epoch,
                loss: epoch_loss,
            });
        }
        history.push(epoch_loss);
    }
    Ok((model, history))
}
