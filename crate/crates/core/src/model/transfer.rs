//! Semi-supervised transfer step: decoder dropped, softmax head appended,
//! first dense layer frozen, remaining layers trained on the binary labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AutoencoderModel, EncoderModel, TrainingSchedule};
use crate::nn::{epoch_batches, log_softmax_rows, Activation, AdamState, DenseLayer, Matrix, Network};
use crate::rng::Rng;

/// Two-unit softmax layer on top of the embedding. Column 1 is the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub layer: DenseLayer,
}

impl ClassifierHead {
    /// Zero weights: the head starts at P = ½ for every row, so the first
    /// updates do not slam large random logits back into a relu embedding.
    pub fn new(embedding_dim: usize) -> Self {
        let layer = DenseLayer::new(Matrix::zeros(embedding_dim, 2), vec![0.0; 2], Activation::Softmax)
            .expect("bias sized to the output");
        Self { layer }
    }
}

/// Class probabilities, one row per sample, columns `[P(0), P(1)]`.
pub fn predict_proba(encoder: &EncoderModel, head: &ClassifierHead, data: &Matrix) -> Result<Matrix> {
    let z = encoder.encode(data)?;
    Ok(head.layer.forward(&z)?.0)
}

pub(crate) fn validate_labels(labels: &[u8], rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::invalid(format!("{} labels for {rows} rows", labels.len())));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::invalid(format!("label {} at row {i} is not binary", labels[i])));
    }
    Ok(())
}

/// Mean cross-entropy of a two-way softmax against binary labels, computed
/// from logits with log-sum-exp. Equal to binary cross-entropy on `P(1)`.
/// Returns the loss and its gradient w.r.t. the logits.
pub fn softmax_bce_from_logits(logits: &Matrix, labels: &[u8]) -> Result<(f64, Matrix)> {
    if logits.cols() != 2 || logits.rows() != labels.len() {
        return Err(Error::shape("softmax_bce", logits.shape(), (labels.len(), 2)));
    }
    let n = logits.rows().max(1) as f64;
    let log_p = log_softmax_rows(logits);
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), 2);
    for (i, &y) in labels.iter().enumerate() {
        let y = y as usize;
        loss -= log_p[(i, y)];
        for j in 0..2 {
            let target = if j == y { 1.0 } else { 0.0 };
            grad[(i, j)] = (log_p[(i, j)].exp() - target) / n;
        }
    }
    Ok((loss / n, grad))
}

pub fn transfer_train(
    autoencoder: &AutoencoderModel,
    data: &Matrix,
    labels: &[u8],
    schedule: &TrainingSchedule,
    rng: &mut Rng,
) -> Result<(EncoderModel, ClassifierHead, Vec<f64>)> {
    schedule.validate()?;
    validate_labels(labels, data.rows())?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::invalid("transfer step needs both classes in the labels"));
    }
    let mut encoder = autoencoder.encoder.clone();
    for l in &mut encoder.network.layers {
        l.trainable = true;
    }
    encoder.network.layers[0].trainable = false;
    let mut batch_rng = rng.derive("batches");
    let head = ClassifierHead::new(encoder.embedding_dim());

    let n_enc = encoder.network.layers.len();
    let mut layers = encoder.network.layers.clone();
    layers.push(head.layer);
    let mut net = Network::new(layers)?;
    let mut adam = AdamState::new(schedule.adam, &net.trainable_block_sizes())?;

    let mut history = Vec::with_capacity(schedule.transfer_epochs);
    for epoch in 0..schedule.transfer_epochs {
        let mut total = 0.0;
        for batch in epoch_batches(data.rows(), schedule.batch_size, &mut batch_rng) {
            let x = data.select_rows(&batch);
            let y: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let trace = net.forward_trace(&x)?;
            let (loss, grad_logits) = softmax_bce_from_logits(&trace.caches[n_enc], &y)?;
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    phase: "transfer",
                    epoch,
                    loss,
                });
            }
            total += loss * batch.len() as f64;
            let (grads, _) = net.backward_pre(&trace, &grad_logits)?;
            let grad_slices = net.trainable_grad_slices(&grads);
            adam.step(&mut net.trainable_param_slices(), &grad_slices)?;
        }
        history.push(total / data.rows() as f64);
    }

    let head_layer = net.layers.pop().expect("head appended");
    encoder.network = Network::new(net.layers)?;
    Ok((encoder, ClassifierHead { layer: head_layer }, history))
}
