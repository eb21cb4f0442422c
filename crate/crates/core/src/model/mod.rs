//! Three-phase DSEC training and the DEC baseline.

mod autoencoder;
mod checkpoint;
mod cluster;
mod pipeline;
mod spec;
mod transfer;

pub use autoencoder::{pretrain_autoencoder, AutoencoderModel, EncoderModel};
pub use checkpoint::{Checkpoint, Phase, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use cluster::{
    assign_clusters, cluster_finetune, soft_assign, soft_assign_backward, target_distribution, ClusterHead,
    ClusterHistory,
};
pub use pipeline::{run_dec, run_dsec, PhaseReport, TrainedModel};
pub use spec::{EncoderSpec, Method, TrainingSchedule};
pub use transfer::{predict_proba, softmax_bce_from_logits, transfer_train, ClassifierHead};
