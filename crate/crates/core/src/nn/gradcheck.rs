//! Central finite-difference verification of analytic gradients.

use crate::nn::{Activation, Matrix, Network};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so entries whose true gradient is
/// numerically zero are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub n_params: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares the analytic gradient returned by `loss_and_grad` at `params` with
/// central differences `(f(θ+h) − f(θ−h)) / 2h`, one coordinate at a time.
pub fn grad_check<F>(mut loss_and_grad: F, params: &[f64], step: f64, tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_and_grad(params);
    assert_eq!(analytic.len(), params.len(), "gradient length must match parameters");
    let mut theta = params.to_vec();
    let mut worst = (0.0f64, 0usize);
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let plus = loss_and_grad(&theta).0;
        theta[i] = orig - step;
        let minus = loss_and_grad(&theta).0;
        theta[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        if err > worst.0 || err.is_nan() {
            worst = (err, i);
        }
    }
    GradCheckReport {
        max_rel_error: worst.0,
        worst_index: worst.1,
        n_params: params.len(),
        tolerance,
        passed: worst.0 < tolerance,
    }
}

/// Shifts biases of relu units until no pre-activation on `input` lies within
/// `margin` of the kink at zero. Returns the number of adjustments made.
pub fn nudge_relu_kinks(net: &mut Network, input: &Matrix, margin: f64) -> usize {
    let mut adjustments = 0;
    for _ in 0..1000 {
        let trace = match net.forward_trace(input) {
            Ok(t) => t,
            Err(_) => return adjustments,
        };
        let hit = net.layers.iter().enumerate().find_map(|(l, layer)| {
            if layer.activation() != Activation::Relu {
                return None;
            }
            let pre = &trace.caches[l];
            (0..pre.rows())
                .flat_map(|i| (0..pre.cols()).map(move |j| (i, j)))
                .find(|&(i, j)| pre[(i, j)].abs() < margin)
                .map(|(_, j)| (l, j))
        });
        match hit {
            Some((l, j)) => {
                net.layers[l].bias[j] += 2.5 * margin;
                adjustments += 1;
            }
            None => break,
        }
    }
    adjustments
}
