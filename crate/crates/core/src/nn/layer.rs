//! Fully connected layer: `output = activation(input · W + b)`.
//!
//! Weights are stored `in_dim × out_dim` so a batch (rows = samples) multiplies
//! on the left. The forward pass returns the pre-activation values as a cache
//! for the backward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

impl Activation {
    pub fn apply(self, pre: &Matrix) -> Matrix {
        match self {
            Activation::Linear => pre.clone(),
            Activation::Relu => pre.map(|v| v.max(0.0)),
            Activation::Softmax => softmax_rows(pre),
        }
    }

    /// Gradient w.r.t. the pre-activation given the gradient w.r.t. the output.
    pub fn backward(self, pre: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
        if pre.shape() != grad_out.shape() {
            return Err(Error::shape("activation_backward", pre.shape(), grad_out.shape()));
        }
        match self {
            Activation::Linear => Ok(grad_out.clone()),
            Activation::Relu => pre.zip_map(grad_out, |z, g| if z > 0.0 { g } else { 0.0 }),
            Activation::Softmax => {
                let s = softmax_rows(pre);
                let mut out = Matrix::zeros(pre.rows(), pre.cols());
                for i in 0..pre.rows() {
                    let srow = s.row(i);
                    let grow = grad_out.row(i);
                    let dot: f64 = srow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for (o, (&sv, &gv)) in out.row_mut(i).iter_mut().zip(srow.iter().zip(grow)) {
                        *o = sv * (gv - dot);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Row-wise log-softmax via log-sum-exp.
pub fn log_softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `in_dim × out_dim`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    activation: Activation,
    pub trainable: bool,
}

/// Gradients produced by [`DenseLayer::backward`].
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Matrix,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::shape("dense_layer_new", weights.shape(), (1, bias.len())));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            trainable: true,
        })
    }

    /// He-style uniform initialization: `W ~ U(-√(6/fan_in), √(6/fan_in))`, zero bias.
    pub fn he_uniform(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / in_dim.max(1) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Self {
            weights: Matrix::from_vec(in_dim, out_dim, data).expect("sized above"),
            bias: vec![0.0; out_dim],
            activation,
            trainable: true,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// Pre-activation `input · W + b`.
    pub fn pre_activation(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape("dense_forward", input.shape(), self.weights.shape()));
        }
        let mut z = input.matmul(&self.weights)?;
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(z)
    }

    /// Returns `(output, cache)` where the cache holds the pre-activation.
    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, Matrix)> {
        let pre = self.pre_activation(input)?;
        let out = self.activation.apply(&pre);
        Ok((out, pre))
    }

    /// Backward pass given the gradient w.r.t. this layer's output.
    pub fn backward(&self, grad_output: &Matrix, cache: &Matrix, input: &Matrix) -> Result<DenseGrads> {
        let grad_pre = self.activation.backward(cache, grad_output)?;
        self.backward_pre(&grad_pre, input)
    }

    /// Backward pass given the gradient w.r.t. the pre-activation.
    pub fn backward_pre(&self, grad_pre: &Matrix, input: &Matrix) -> Result<DenseGrads> {
        if grad_pre.cols() != self.out_dim() || grad_pre.rows() != input.rows() {
            return Err(Error::shape("dense_backward", grad_pre.shape(), input.shape()));
        }
        if input.cols() != self.in_dim() {
            return Err(Error::shape("dense_backward", input.shape(), self.weights.shape()));
        }
        let weights = input.t_matmul(grad_pre)?;
        let bias = grad_pre.col_sums();
        let grad_input = grad_pre.matmul_t(&self.weights)?;
        Ok(DenseGrads {
            input: grad_input,
            weights,
            bias,
        })
    }

    /// Flat parameter view: weights (row-major) followed by bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.as_slice().to_vec();
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let nw = self.weights.rows() * self.weights.cols();
        self.weights.as_mut_slice().copy_from_slice(&flat[..nw]);
        self.bias.copy_from_slice(&flat[nw..]);
        Ok(())
    }
}

impl DenseGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut g = self.weights.as_slice().to_vec();
        g.extend_from_slice(&self.bias);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_linear_layer_is_identity() {
        let layer = DenseLayer::new(Matrix::identity(3), vec![0.0; 3], Activation::Linear).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 4.0, -1.0]]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_clips_negative_preactivation() {
        let layer = DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Relu).unwrap();
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let (y, cache) = layer.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 2.0]);
        assert_eq!(cache.as_slice(), &[-1.0, 2.0]);
    }

    #[test]
    fn affine_hand_evaluation() {
        let w = Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.5], Activation::Linear).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.as_slice(), &[2.5]);
    }

    #[test]
    fn forward_dimension_mismatch_names_shapes() {
        let layer = DenseLayer::new(Matrix::zeros(3, 2), vec![0.0; 2], Activation::Linear).unwrap();
        let err = layer.forward(&Matrix::zeros(4, 5)).unwrap_err().to_string();
        assert!(err.contains("4x5") && err.contains("3x2"), "{err}");
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = Rng::new(3);
        let layer = DenseLayer::he_uniform(4, 3, Activation::Relu, &mut rng);
        let x = Matrix::from_rows(&[vec![0.3, -0.2, 1.0, 0.5], vec![1.0, 1.0, -1.0, 0.0]]).unwrap();
        let (_, cache) = layer.forward(&x).unwrap();
        let g = layer.backward(&Matrix::zeros(2, 3), &cache, &x).unwrap();
        assert!(g.input.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.weights.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let mut rng = Rng::new(5);
        let layer = DenseLayer::he_uniform(3, 2, Activation::Linear, &mut rng);
        let x = Matrix::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap();
        let go = Matrix::from_rows(&[vec![1.5, -0.25]]).unwrap();
        let (_, cache) = layer.forward(&x).unwrap();
        let g = layer.backward(&go, &cache, &x).unwrap();
        let expected = x.transpose().matmul(&go).unwrap();
        assert_eq!(g.weights, expected);
        assert_eq!(g.bias, vec![1.5, -0.25]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let logits = Matrix::from_rows(&[vec![1000.0, 999.0, -5.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let s = softmax_rows(&logits);
        for r in s.iter_rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let ls = log_softmax_rows(&logits);
        assert!((ls[(0, 0)].exp() - s[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = Rng::new(9);
        let mut layer = DenseLayer::he_uniform(3, 2, Activation::Relu, &mut rng);
        let p: Vec<f64> = (0..8).map(|i| i as f64).collect();
        layer.set_params(&p).unwrap();
        assert_eq!(layer.params(), p);
        assert!(layer.set_params(&p[..7]).is_err());
    }
}
