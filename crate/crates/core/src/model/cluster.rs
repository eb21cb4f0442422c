//! Clustering fine-tuning: Student's t soft assignment, sharpened target
//! distribution and joint optimisation of encoder and centroids under
//! `KL(P ‖ Q)`.

use serde::{Deserialize, Serialize};

use crate::analysis::kmeans_restarts;
use crate::error::{Error, Result};
use crate::model::{EncoderModel, TrainingSchedule};
use crate::nn::{epoch_batches, loss_and_grad, sq_dist, AdamState, LossKind, Matrix};
use crate::rng::Rng;

/// Centroids `μ_j` in the embedded space plus the kernel's degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterHead {
    /// `k × m`.
    pub centroids: Matrix,
    pub alpha: f64,
}

impl ClusterHead {
    pub fn new(centroids: Matrix, alpha: f64) -> Result<Self> {
        if centroids.rows() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 centroids, got {}",
                centroids.rows()
            )));
        }
        if !centroids.is_finite() {
            return Err(Error::NonFinite("centroids".into()));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        Ok(Self { centroids, alpha })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }
}

/// `q_ij ∝ (1 + ‖z_i − μ_j‖² / α)^(−(α+1)/2)`, normalised over `j`.
pub fn soft_assign(embedding: &Matrix, head: &ClusterHead) -> Result<Matrix> {
    if head.k() < 2 {
        return Err(Error::invalid("soft assignment needs k >= 2"));
    }
    if embedding.cols() != head.centroids.cols() {
        return Err(Error::shape("soft_assign", embedding.shape(), head.centroids.shape()));
    }
    let alpha = head.alpha;
    let power = -(alpha + 1.0) / 2.0;
    let mut q = Matrix::zeros(embedding.rows(), head.k());
    for i in 0..embedding.rows() {
        let z = embedding.row(i);
        let row = q.row_mut(i);
        let mut s = 0.0;
        for (j, mu) in head.centroids.iter_rows().enumerate() {
            let w = (1.0 + sq_dist(z, mu) / alpha).powf(power);
            row[j] = w;
            s += w;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(q)
}

/// Gradients of a scalar loss w.r.t. the embedding and the centroids, given
/// its gradient w.r.t. the soft assignment `Q`.
pub fn soft_assign_backward(
    embedding: &Matrix,
    head: &ClusterHead,
    q: &Matrix,
    grad_q: &Matrix,
) -> Result<(Matrix, Matrix)> {
    if q.shape() != grad_q.shape() || q.rows() != embedding.rows() || q.cols() != head.k() {
        return Err(Error::shape("soft_assign_backward", q.shape(), grad_q.shape()));
    }
    let alpha = head.alpha;
    let coef = -(alpha + 1.0) / (2.0 * alpha);
    let mut grad_z = Matrix::zeros(embedding.rows(), embedding.cols());
    let mut grad_mu = Matrix::zeros(head.k(), head.centroids.cols());
    for i in 0..embedding.rows() {
        let z = embedding.row(i);
        let qi = q.row(i);
        let gi = grad_q.row(i);
        let dot: f64 = qi.iter().zip(gi).map(|(a, b)| a * b).sum();
        for (j, mu) in head.centroids.iter_rows().enumerate() {
            let base = 1.0 + sq_dist(z, mu) / alpha;
            // dL/dw_ij · w_ij = q_ij (g_ij − Σ_l g_il q_il); then chain through the kernel
            let grad_d = (gi[j] - dot) * qi[j] * coef / base;
            for (c, (&zc, &mc)) in z.iter().zip(mu).enumerate() {
                let g = 2.0 * grad_d * (zc - mc);
                grad_z[(i, c)] += g;
                grad_mu[(j, c)] -= g;
            }
        }
    }
    Ok((grad_z, grad_mu))
}

/// `p_ij = (q_ij² / f_j) / Σ_j' (q_ij'² / f_j')` with soft frequencies `f_j = Σ_i q_ij`.
pub fn target_distribution(q: &Matrix) -> Result<Matrix> {
    let freq = q.col_sums();
    if let Some(j) = freq.iter().position(|&f| !(f > 0.0)) {
        return Err(Error::EmptyCluster(j));
    }
    let mut p = Matrix::zeros(q.rows(), q.cols());
    for i in 0..q.rows() {
        let row = p.row_mut(i);
        let mut s = 0.0;
        for (j, (&qij, &fj)) in q.row(i).iter().zip(&freq).enumerate() {
            row[j] = qij * qij / fj;
            s += row[j];
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    Ok(p)
}

fn hard_labels(q: &Matrix) -> Vec<usize> {
    q.iter_rows()
        .map(|r| {
            let mut best = 0;
            for j in 1..r.len() {
                if r[j] > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Per-epoch diagnostics of the clustering phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterHistory {
    /// `KL(P ‖ Q)` over the full training set at the start of each epoch.
    pub kl: Vec<f64>,
    /// Largest deviation of any row sum of `Q` or `P` from 1.
    pub max_row_sum_error: Vec<f64>,
    /// Fraction of hard assignments that changed since the previous refresh.
    pub assignment_change: Vec<f64>,
    pub stopped_early: bool,
}

fn max_row_sum_error(m: &Matrix) -> f64 {
    m.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// Initialises centroids by k-means on the current embedding, unfreezes every
/// encoder layer and minimises `KL(P ‖ Q)` jointly over encoder weights and
/// centroids. `P` is refreshed from the full training set once per epoch.
pub fn cluster_finetune(
    encoder: &EncoderModel,
    data: &Matrix,
    k: usize,
    schedule: &TrainingSchedule,
    rng: &mut Rng,
) -> Result<(EncoderModel, ClusterHead, ClusterHistory)> {
    schedule.validate()?;
    if k < 2 {
        return Err(Error::invalid("clustering needs k >= 2"));
    }
    let mut encoder = encoder.clone();
    for l in &mut encoder.network.layers {
        l.trainable = true;
    }
    let mut km_rng = rng.derive("kmeans");
    let mut batch_rng = rng.derive("batches");

    let z0 = encoder.encode(data)?;
    let km = kmeans_restarts(&z0, k, schedule.kmeans_restarts, &mut km_rng)?;
    let mut head = ClusterHead::new(km.centroids, schedule.alpha)?;

    let mut sizes = encoder.network.trainable_block_sizes();
    debug_assert_eq!(sizes.len(), 2 * encoder.network.layers.len());
    sizes.push(head.centroids.rows() * head.centroids.cols());
    let mut adam = AdamState::new(schedule.adam, &sizes)?;

    let mut history = ClusterHistory::default();
    let mut prev_labels: Option<Vec<usize>> = None;
    for epoch in 0..schedule.cluster_epochs {
        let z = encoder.encode(data)?;
        let q = soft_assign(&z, &head)?;
        let p = target_distribution(&q)?;
        let (kl, _) = loss_and_grad(LossKind::KlDivergence, &q, &p)?;
        if !kl.is_finite() {
            return Err(Error::Diverged {
                phase: "cluster",
                epoch,
                loss: kl,
            });
        }
        history.kl.push(kl);
        history
            .max_row_sum_error
            .push(max_row_sum_error(&q).max(max_row_sum_error(&p)));
        let labels = hard_labels(&q);
        let changed = prev_labels.as_ref().map_or(1.0, |prev| {
            prev.iter().zip(&labels).filter(|(a, b)| a != b).count() as f64 / labels.len() as f64
        });
        history.assignment_change.push(changed);
        if let (Some(tol), Some(_)) = (schedule.early_stop_fraction, &prev_labels) {
            if changed < tol {
                history.stopped_early = true;
                break;
            }
        }
        prev_labels = Some(labels);

        for batch in epoch_batches(data.rows(), schedule.batch_size, &mut batch_rng) {
            let x = data.select_rows(&batch);
            let p_batch = p.select_rows(&batch);
            let trace = encoder.network.forward_trace(&x)?;
            let q_batch = soft_assign(&trace.output, &head)?;
            let (_, grad_q) = loss_and_grad(LossKind::KlDivergence, &q_batch, &p_batch)?;
            let (grad_z, grad_mu) = soft_assign_backward(&trace.output, &head, &q_batch, &grad_q)?;
            let (grads, _) = encoder.network.backward(&trace, &grad_z)?;
            let mut grad_slices = encoder.network.trainable_grad_slices(&grads);
            grad_slices.push(grad_mu.as_slice());
            let mut params = encoder.network.trainable_param_slices();
            params.push(head.centroids.as_mut_slice());
            adam.step(&mut params, &grad_slices)?;
        }
    }
    Ok((encoder, head, history))
}

/// Hard cluster labels `argmax_j q_ij`, lowest index on ties.
pub fn assign_clusters(encoder: &EncoderModel, head: &ClusterHead, data: &Matrix) -> Result<Vec<usize>> {
    let q = soft_assign(&encoder.encode(data)?, head)?;
    Ok(hard_labels(&q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(rows: &[Vec<f64>]) -> ClusterHead {
        ClusterHead::new(Matrix::from_rows(rows).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn equidistant_point_splits_evenly() {
        let h = head(&[vec![-1.0, 0.0], vec![1.0, 0.0]]);
        let q = soft_assign(&Matrix::from_rows(&[vec![0.0, 3.0]]).unwrap(), &h).unwrap();
        assert_eq!(q.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn hand_evaluated_assignment() {
        // weights 1 and 1/(1+4) = 1/5 ⇒ [5/6, 1/6]
        let h = head(&[vec![0.0, 0.0], vec![2.0, 0.0]]);
        let q = soft_assign(&Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap(), &h).unwrap();
        assert!((q[(0, 0)] - 5.0 / 6.0).abs() < 1e-15);
        assert!((q[(0, 1)] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_centroid_rejected() {
        assert!(ClusterHead::new(Matrix::zeros(1, 3), 1.0).is_err());
    }

    #[test]
    fn uniform_q_gives_uniform_p() {
        let q = Matrix::filled(5, 4, 0.25);
        let p = target_distribution(&q).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn single_row_target_equals_q() {
        let q = Matrix::from_rows(&[vec![0.9, 0.1]]).unwrap();
        let p = target_distribution(&q).unwrap();
        assert!((p[(0, 0)] - 0.9).abs() < 1e-15 && (p[(0, 1)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_soft_cluster_is_an_error() {
        let q = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(target_distribution(&q), Err(Error::EmptyCluster(1))));
    }
}
