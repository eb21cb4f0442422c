//! Ordered stack of dense layers with cached forward passes and backprop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseGrads, DenseLayer, Matrix};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input fed to each layer.
    pub inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pub caches: Vec<Matrix>,
    pub output: Matrix,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape("network", w[0].weights.shape(), w[1].weights.shape()));
            }
        }
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x)?.0;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Matrix) -> Result<Trace> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (out, pre) = layer.forward(&x)?;
            inputs.push(x);
            caches.push(pre);
            x = out;
        }
        Ok(Trace {
            inputs,
            caches,
            output: x,
        })
    }

    /// Backprop from the gradient w.r.t. the network output.
    /// Returns per-layer gradients and the gradient w.r.t. the network input.
    pub fn backward(&self, trace: &Trace, grad_output: &Matrix) -> Result<(Vec<DenseGrads>, Matrix)> {
        let last = self
            .layers
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::invalid("empty network"))?;
        let grad_pre = self.layers[last]
            .activation()
            .backward(&trace.caches[last], grad_output)?;
        self.backward_pre(trace, &grad_pre)
    }

    /// Backprop from the gradient w.r.t. the last layer's pre-activation.
    pub fn backward_pre(&self, trace: &Trace, grad_last_pre: &Matrix) -> Result<(Vec<DenseGrads>, Matrix)> {
        let n = self.layers.len();
        let mut grads: Vec<Option<DenseGrads>> = (0..n).map(|_| None).collect();
        let mut g = self.layers[n - 1].backward_pre(grad_last_pre, &trace.inputs[n - 1])?;
        let mut upstream = g.input.clone();
        grads[n - 1] = Some(g);
        for l in (0..n - 1).rev() {
            g = self.layers[l].backward(&upstream, &trace.caches[l], &trace.inputs[l])?;
            upstream = g.input.clone();
            grads[l] = Some(g);
        }
        Ok((grads.into_iter().map(|g| g.expect("filled")).collect(), upstream))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(DenseLayer::params).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut off = 0;
        for layer in &mut self.layers {
            let n = layer.param_count();
            layer.set_params(&flat[off..off + n])?;
            off += n;
        }
        Ok(())
    }

    /// Sizes of the Adam blocks for trainable layers: weights then bias per layer.
    pub fn trainable_block_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| l.trainable)
            .flat_map(|l| [l.weights.rows() * l.weights.cols(), l.bias.len()])
            .collect()
    }

    pub fn trainable_param_slices(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in self.layers.iter_mut().filter(|l| l.trainable) {
            out.push(l.weights.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }

    /// Gradient slices aligned with [`Network::trainable_param_slices`].
    pub fn trainable_grad_slices<'a>(&self, grads: &'a [DenseGrads]) -> Vec<&'a [f64]> {
        let mut out = Vec::new();
        for (l, g) in self.layers.iter().zip(grads) {
            if l.trainable {
                out.push(g.weights.as_slice());
                out.push(g.bias.as_slice());
            }
        }
        out
    }
}

/// Row-index batches for one epoch. `None` gives a single full batch in row order;
/// otherwise rows are shuffled by `rng` and chunked.
pub fn epoch_batches(n: usize, batch_size: Option<usize>, rng: &mut Rng) -> Vec<Vec<usize>> {
    match batch_size {
        None => vec![(0..n).collect()],
        Some(bs) => {
            let perm = rng.permutation(n);
            perm.chunks(bs.max(1)).map(<[usize]>::to_vec).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    #[test]
    fn rejects_inconsistent_dims() {
        let mut rng = Rng::new(0);
        let a = DenseLayer::he_uniform(3, 4, Activation::Relu, &mut rng);
        let b = DenseLayer::he_uniform(5, 2, Activation::Linear, &mut rng);
        assert!(Network::new(vec![a, b]).is_err());
    }

    #[test]
    fn frozen_layers_are_excluded_from_blocks() {
        let mut rng = Rng::new(0);
        let mut a = DenseLayer::he_uniform(3, 4, Activation::Relu, &mut rng);
        a.trainable = false;
        let b = DenseLayer::he_uniform(4, 2, Activation::Linear, &mut rng);
        let mut net = Network::new(vec![a, b]).unwrap();
        assert_eq!(net.trainable_block_sizes(), vec![8, 2]);
        assert_eq!(net.trainable_param_slices().len(), 2);
    }

    #[test]
    fn batches_cover_rows_once() {
        let mut rng = Rng::new(1);
        let b = epoch_batches(10, Some(3), &mut rng);
        assert_eq!(b.len(), 4);
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(epoch_batches(4, None, &mut rng), vec![vec![0, 1, 2, 3]]);
    }
}
