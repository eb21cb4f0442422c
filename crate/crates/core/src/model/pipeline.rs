use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    cluster_finetune, predict_proba, pretrain_autoencoder, transfer_train, AutoencoderModel, ClassifierHead,
    ClusterHead, ClusterHistory, EncoderModel, EncoderSpec, Method, TrainingSchedule,
};
use crate::nn::{LossKind, Matrix};
use crate::rng::Rng;

/// Everything needed to embed or classify new rows after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub method: Method,
    pub autoencoder: AutoencoderModel,
    /// Encoder after the transfer step (`X → Z′`), DSEC only.
    pub transfer_encoder: Option<EncoderModel>,
    pub classifier: Option<ClassifierHead>,
    /// Final encoder (`X → Z″`).
    pub encoder: EncoderModel,
    pub cluster_head: ClusterHead,
}

impl TrainedModel {
    pub fn embed(&self, data: &Matrix) -> Result<Matrix> {
        self.encoder.encode(data)
    }

    /// Positive-class probability from the classifier on the transfer-step encoder.
    pub fn positive_proba_after_transfer(&self, data: &Matrix) -> Result<Option<Vec<f64>>> {
        match (&self.transfer_encoder, &self.classifier) {
            (Some(enc), Some(head)) => Ok(Some(predict_proba(enc, head, data)?.column(1))),
            _ => Ok(None),
        }
    }

    /// Positive-class probability from the classifier on the final encoder.
    pub fn positive_proba_final(&self, data: &Matrix) -> Result<Option<Vec<f64>>> {
        match &self.classifier {
            Some(head) => Ok(Some(predict_proba(&self.encoder, head, data)?.column(1))),
            None => Ok(None),
        }
    }
}

/// Loss histories and embedding snapshots of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub method: Method,
    pub pretrain_loss: Vec<f64>,
    pub transfer_loss: Option<Vec<f64>>,
    pub cluster: ClusterHistory,
    /// Embedding after pretraining.
    pub z: Matrix,
    /// Embedding after the transfer step (DSEC only).
    pub z_prime: Option<Matrix>,
    /// Embedding after clustering.
    pub z_double_prime: Matrix,
    /// Training-set class probabilities from the transfer-step classifier (DSEC only).
    pub classifier_proba: Option<Matrix>,
    pub model: TrainedModel,
}

impl PhaseReport {
    /// One loss array per phase that ran, in order.
    pub fn phase_losses(&self) -> Vec<&[f64]> {
        let mut out = vec![self.pretrain_loss.as_slice()];
        if let Some(t) = &self.transfer_loss {
            out.push(t.as_slice());
        }
        out.push(self.cluster.kl.as_slice());
        out
    }
}

/// Unsupervised baseline: least-squares de-noising pretraining, then clustering.
pub fn run_dec(
    data: &Matrix,
    spec: &EncoderSpec,
    schedule: &TrainingSchedule,
    k: usize,
    rng: &Rng,
) -> Result<PhaseReport> {
    let (ae, pretrain_loss) = pretrain_autoencoder(data, spec, LossKind::Mse, schedule, &mut rng.derive("pretrain"))?;
    let z = ae.encoder.encode(data)?;
    let (encoder, cluster_head, cluster) =
        cluster_finetune(&ae.encoder, data, k, schedule, &mut rng.derive("cluster"))?;
    let z_double_prime = encoder.encode(data)?;
    Ok(PhaseReport {
        method: Method::Dec,
        pretrain_loss,
        transfer_loss: None,
        cluster,
        z,
        z_prime: None,
        z_double_prime,
        classifier_proba: None,
        model: TrainedModel {
            method: Method::Dec,
            autoencoder: ae,
            transfer_encoder: None,
            classifier: None,
            encoder,
            cluster_head,
        },
    })
}

/// Three phases: MAE de-noising pretraining, label transfer, clustering.
pub fn run_dsec(
    data: &Matrix,
    labels: &[u8],
    spec: &EncoderSpec,
    schedule: &TrainingSchedule,
    k: usize,
    rng: &Rng,
) -> Result<PhaseReport> {
    let (ae, pretrain_loss) = pretrain_autoencoder(data, spec, LossKind::Mae, schedule, &mut rng.derive("pretrain"))?;
    let z = ae.encoder.encode(data)?;
    let (transfer_encoder, head, transfer_loss) =
        transfer_train(&ae, data, labels, schedule, &mut rng.derive("transfer"))?;
    let z_prime = transfer_encoder.encode(data)?;
    let classifier_proba = predict_proba(&transfer_encoder, &head, data)?;
    let (encoder, cluster_head, cluster) =
        cluster_finetune(&transfer_encoder, data, k, schedule, &mut rng.derive("cluster"))?;
    let z_double_prime = encoder.encode(data)?;
    Ok(PhaseReport {
        method: Method::Dsec,
        pretrain_loss,
        transfer_loss: Some(transfer_loss),
        cluster,
        z,
        z_prime: Some(z_prime),
        z_double_prime,
        classifier_proba: Some(classifier_proba),
        model: TrainedModel {
            method: Method::Dsec,
            autoencoder: ae,
            transfer_encoder: Some(transfer_encoder),
            classifier: Some(head),
            encoder,
            cluster_head,
        },
    })
}
