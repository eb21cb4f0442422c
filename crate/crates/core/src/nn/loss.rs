//! Scalar losses and their gradients w.r.t. the prediction.
//!
//! `mse`, `mae` and `bce` average over every element. `kl_divergence` sums
//! over the columns of each row and averages over rows, computing
//! `KL(target ‖ prediction)` with the target held constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Tolerance on row sums of probability inputs.
pub const NORMALIZATION_TOL: f64 = 1e-6;

/// How far outside `(0, 1)` a BCE prediction may stray before it is an error
/// rather than rounding noise to clamp.
const BCE_RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Mae,
    Bce,
    KlDivergence,
}

pub fn loss_and_grad(kind: LossKind, prediction: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if prediction.shape() != target.shape() {
        return Err(Error::shape("loss_and_grad", prediction.shape(), target.shape()));
    }
    let n_el = (prediction.rows() * prediction.cols()).max(1) as f64;
    match kind {
        LossKind::Mse => {
            let diff = prediction.sub(target)?;
            let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / n_el;
            Ok((loss, diff.scale(2.0 / n_el)))
        }
        LossKind::Mae => {
            let diff = prediction.sub(target)?;
            let loss = diff.as_slice().iter().map(|d| d.abs()).sum::<f64>() / n_el;
            let grad = diff.map(|d| {
                if d > 0.0 {
                    1.0 / n_el
                } else if d < 0.0 {
                    -1.0 / n_el
                } else {
                    0.0
                }
            });
            Ok((loss, grad))
        }
        LossKind::Bce => {
            for (idx, (&p, &t)) in prediction.as_slice().iter().zip(target.as_slice()).enumerate() {
                if t != 0.0 && t != 1.0 {
                    return Err(Error::Domain {
                        op: "bce",
                        detail: format!("target {t} at flat index {idx} is not 0 or 1"),
                    });
                }
                if !(p > -BCE_RANGE_TOL && p < 1.0 + BCE_RANGE_TOL) {
                    return Err(Error::Domain {
                        op: "bce",
                        detail: format!("prediction {p} at flat index {idx} outside (0, 1)"),
                    });
                }
            }
            let mut loss = 0.0;
            let grad = prediction.zip_map(target, |p, t| {
                let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                (pc - t) / (pc * (1.0 - pc)) / n_el
            })?;
            for (&p, &t) in prediction.as_slice().iter().zip(target.as_slice()) {
                let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            }
            Ok((loss / n_el, grad))
        }
        LossKind::KlDivergence => {
            check_distribution("kl_divergence prediction", prediction)?;
            check_distribution("kl_divergence target", target)?;
            let n = prediction.rows().max(1) as f64;
            let mut loss = 0.0;
            for (&q, &p) in prediction.as_slice().iter().zip(target.as_slice()) {
                if p > 0.0 {
                    loss += p * (p.ln() - q.max(PROB_CLAMP).ln());
                }
            }
            let grad = prediction.zip_map(target, |q, p| -p / q.max(PROB_CLAMP) / n)?;
            Ok((loss / n, grad))
        }
    }
}

/// Errors unless every row is a probability vector within [`NORMALIZATION_TOL`].
pub fn check_distribution(what: &str, m: &Matrix) -> Result<()> {
    for (i, row) in m.iter_rows().enumerate() {
        if row.iter().any(|&v| !(v >= -NORMALIZATION_TOL) || !v.is_finite()) {
            return Err(Error::Domain {
                op: "probability_rows",
                detail: format!("{what}: row {i} has a negative or non-finite entry"),
            });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Domain {
                op: "probability_rows",
                detail: format!("{what}: row {i} sums to {s}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mse_perfect_fit() {
        let p = m(&[vec![0.3, -1.0], vec![2.0, 4.0]]);
        let (loss, grad) = loss_and_grad(LossKind::Mse, &p, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mae_hand_value() {
        let (loss, _) = loss_and_grad(LossKind::Mae, &m(&[vec![0.0, 2.0]]), &m(&[vec![1.0, 0.0]])).unwrap();
        assert!((loss - 1.5).abs() < 1e-15);
    }

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        let p = m(&[vec![0.2, 0.8], vec![0.5, 0.5], vec![1.0, 0.0]]);
        let (loss, _) = loss_and_grad(LossKind::KlDivergence, &p, &p).unwrap();
        assert!(loss.abs() < 1e-15);
    }

    #[test]
    fn kl_rejects_unnormalized_rows() {
        let q = m(&[vec![0.2, 0.7]]);
        let p = m(&[vec![0.5, 0.5]]);
        assert!(matches!(
            loss_and_grad(LossKind::KlDivergence, &q, &p),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn bce_domain_errors() {
        let t = m(&[vec![1.0, 0.0]]);
        assert!(loss_and_grad(LossKind::Bce, &m(&[vec![1.5, 0.5]]), &t).is_err());
        assert!(loss_and_grad(LossKind::Bce, &m(&[vec![0.5, 0.5]]), &m(&[vec![0.5, 0.0]])).is_err());
        // exact 0/1 predictions are clamped, not rejected
        let (loss, grad) = loss_and_grad(LossKind::Bce, &m(&[vec![1.0, 0.0]]), &t).unwrap();
        assert!(loss.is_finite() && grad.is_finite());
    }

    #[test]
    fn shape_mismatch() {
        assert!(loss_and_grad(LossKind::Mse, &Matrix::zeros(2, 2), &Matrix::zeros(2, 3)).is_err());
    }
}
