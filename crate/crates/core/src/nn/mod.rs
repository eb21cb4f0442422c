//! Minimal dense neural-network engine.

mod adam;
mod gradcheck;
mod layer;
mod loss;
mod matrix;
mod network;
mod noise;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, nudge_relu_kinks, relative_error, GradCheckReport, DEFAULT_STEP, RELATIVE_FLOOR};
pub use layer::{log_softmax_rows, softmax_rows, Activation, DenseGrads, DenseLayer};
pub use loss::{check_distribution, loss_and_grad, LossKind, NORMALIZATION_TOL, PROB_CLAMP};
pub use matrix::{sq_dist, Matrix};
pub use network::{epoch_batches, Network, Trace};
pub use noise::gaussian_corrupt;
