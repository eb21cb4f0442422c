//! Finite-difference checks over every layer/loss pairing the models use.

use crate::model::{soft_assign, soft_assign_backward, softmax_bce_from_logits, target_distribution, ClusterHead};
use crate::nn::{
    grad_check, loss_and_grad, nudge_relu_kinks, Activation, DenseLayer, GradCheckReport, LossKind, Matrix, Network,
    DEFAULT_STEP,
};
use crate::rng::Rng;

/// Relative-error tolerance of the suite.
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Keeps pre-activations this far from the relu kink, far above the step.
const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCase {
    /// A single dense layer with the given activation under a loss; inputs are checked too.
    Layer(Activation, LossKind),
    /// Fused two-way softmax cross-entropy from logits.
    SoftmaxBceFused,
    /// Student-t soft assignment under `KL(P ‖ Q)`, w.r.t. embedding and centroids.
    SoftAssignKl,
    /// De-noising autoencoder stack (relu hidden, linear output).
    Autoencoder(LossKind),
    /// Encoder plus softmax head under fused BCE, as in the transfer step.
    TransferNetwork,
    /// Encoder plus cluster head under `KL(P ‖ Q)`, as in the clustering phase.
    ClusterNetwork,
}

impl GradCase {
    pub fn all() -> Vec<GradCase> {
        use Activation::*;
        use LossKind::*;
        vec![
            GradCase::Layer(Linear, Mse),
            GradCase::Layer(Relu, Mse),
            GradCase::Layer(Linear, Mae),
            GradCase::Layer(Relu, Mae),
            GradCase::Layer(Softmax, Mse),
            GradCase::Layer(Softmax, Bce),
            GradCase::Layer(Softmax, KlDivergence),
            GradCase::SoftmaxBceFused,
            GradCase::SoftAssignKl,
            GradCase::Autoencoder(Mse),
            GradCase::Autoencoder(Mae),
            GradCase::TransferNetwork,
            GradCase::ClusterNetwork,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            GradCase::Layer(a, l) => format!("dense[{a:?}]+{l:?}").to_lowercase(),
            GradCase::SoftmaxBceFused => "softmax_bce_fused".into(),
            GradCase::SoftAssignKl => "student_t+kl".into(),
            GradCase::Autoencoder(l) => format!("autoencoder+{l:?}").to_lowercase(),
            GradCase::TransferNetwork => "encoder+softmax_head+bce".into(),
            GradCase::ClusterNetwork => "encoder+cluster_head+kl".into(),
        }
    }

    /// Draws one random instance and checks it.
    pub fn check(&self, rng: &mut Rng) -> GradCheckReport {
        let n = 2 + rng.below(4);
        let d = 2 + rng.below(4);
        match *self {
            GradCase::Layer(act, loss) => {
                let out = 2 + rng.below(3);
                let layer = DenseLayer::he_uniform(d, out, act, rng);
                let input = random_matrix(n, d, rng);
                let mut net = Network::new(vec![layer]).expect("single layer");
                nudge_relu_kinks(&mut net, &input, KINK_MARGIN);
                let target = loss_target(loss, &net.forward(&input).expect("forward"), rng);
                check_network_with_input(net, input, |out| loss_and_grad(loss, out, &target).expect("loss"))
            }
            GradCase::SoftmaxBceFused => {
                let logits = random_matrix(n, 2, rng).scale(2.0);
                let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
                grad_check(
                    |p| {
                        let m = Matrix::from_vec(n, 2, p.to_vec()).expect("sized");
                        let (l, g) = softmax_bce_from_logits(&m, &labels).expect("loss");
                        (l, g.into_vec())
                    },
                    logits.as_slice(),
                    DEFAULT_STEP,
                    GRAD_TOLERANCE,
                )
            }
            GradCase::SoftAssignKl => {
                let k = 2 + rng.below(3);
                let m = 2 + rng.below(2);
                let z = random_matrix(n, m, rng);
                let mu = random_matrix(k, m, rng);
                let alpha = 0.5 + rng.uniform() * 1.5;
                let p = target_distribution(&soft_assign(&z, &ClusterHead::new(mu.clone(), alpha).unwrap()).unwrap())
                    .unwrap();
                let mut params = z.as_slice().to_vec();
                params.extend_from_slice(mu.as_slice());
                grad_check(
                    |theta| {
                        let z = Matrix::from_vec(n, m, theta[..n * m].to_vec()).unwrap();
                        let head =
                            ClusterHead::new(Matrix::from_vec(k, m, theta[n * m..].to_vec()).unwrap(), alpha).unwrap();
                        let q = soft_assign(&z, &head).unwrap();
                        let (l, gq) = loss_and_grad(LossKind::KlDivergence, &q, &p).unwrap();
                        let (gz, gmu) = soft_assign_backward(&z, &head, &q, &gq).unwrap();
                        let mut g = gz.into_vec();
                        g.extend(gmu.into_vec());
                        (l, g)
                    },
                    &params,
                    DEFAULT_STEP,
                    GRAD_TOLERANCE,
                )
            }
            GradCase::Autoencoder(loss) => {
                let h = 2 + rng.below(4);
                let m = 2;
                let embed_act = if rng.bernoulli(0.5) {
                    Activation::Relu
                } else {
                    Activation::Linear
                };
                let layers = vec![
                    DenseLayer::he_uniform(d, h, Activation::Relu, rng),
                    DenseLayer::he_uniform(h, m, embed_act, rng),
                    DenseLayer::he_uniform(m, h, Activation::Relu, rng),
                    DenseLayer::he_uniform(h, d, Activation::Linear, rng),
                ];
                let mut net = Network::new(layers).unwrap();
                let input = random_matrix(n, d, rng);
                nudge_relu_kinks(&mut net, &input, KINK_MARGIN);
                let target = loss_target(loss, &net.forward(&input).unwrap(), rng);
                check_network(net, &input, |out| loss_and_grad(loss, out, &target).unwrap())
            }
            GradCase::TransferNetwork => {
                let h = 2 + rng.below(4);
                let layers = vec![
                    DenseLayer::he_uniform(d, h, Activation::Relu, rng),
                    DenseLayer::he_uniform(h, 3, Activation::Relu, rng),
                    DenseLayer::he_uniform(3, 2, Activation::Softmax, rng),
                ];
                let mut net = Network::new(layers).unwrap();
                let input = random_matrix(n, d, rng);
                nudge_relu_kinks(&mut net, &input, KINK_MARGIN);
                let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
                let template = net.clone();
                grad_check(
                    |theta| {
                        let mut net = template.clone();
                        net.set_params(theta).unwrap();
                        let trace = net.forward_trace(&input).unwrap();
                        let last = net.layers.len() - 1;
                        let (l, g) = softmax_bce_from_logits(&trace.caches[last], &labels).unwrap();
                        let (grads, _) = net.backward_pre(&trace, &g).unwrap();
                        (l, grads.iter().flat_map(|g| g.flat()).collect())
                    },
                    &net.params(),
                    DEFAULT_STEP,
                    GRAD_TOLERANCE,
                )
            }
            GradCase::ClusterNetwork => {
                let h = 2 + rng.below(4);
                let m = 2;
                let k = 2 + rng.below(2);
                let layers = vec![
                    DenseLayer::he_uniform(d, h, Activation::Relu, rng),
                    DenseLayer::he_uniform(h, m, Activation::Linear, rng),
                ];
                let mut net = Network::new(layers).unwrap();
                let input = random_matrix(n, d, rng);
                nudge_relu_kinks(&mut net, &input, KINK_MARGIN);
                let mu = random_matrix(k, m, rng);
                let z0 = net.forward(&input).unwrap();
                let p = target_distribution(&soft_assign(&z0, &ClusterHead::new(mu.clone(), 1.0).unwrap()).unwrap())
                    .unwrap();
                let n_net = net.param_count();
                let mut params = net.params();
                params.extend_from_slice(mu.as_slice());
                let template = net.clone();
                grad_check(
                    |theta| {
                        let mut net = template.clone();
                        net.set_params(&theta[..n_net]).unwrap();
                        let head =
                            ClusterHead::new(Matrix::from_vec(k, m, theta[n_net..].to_vec()).unwrap(), 1.0).unwrap();
                        let trace = net.forward_trace(&input).unwrap();
                        let q = soft_assign(&trace.output, &head).unwrap();
                        let (l, gq) = loss_and_grad(LossKind::KlDivergence, &q, &p).unwrap();
                        let (gz, gmu) = soft_assign_backward(&trace.output, &head, &q, &gq).unwrap();
                        let (grads, _) = net.backward(&trace, &gz).unwrap();
                        let mut g: Vec<f64> = grads.iter().flat_map(|g| g.flat()).collect();
                        g.extend(gmu.into_vec());
                        (l, g)
                    },
                    &params,
                    DEFAULT_STEP,
                    GRAD_TOLERANCE,
                )
            }
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).expect("sized")
}

fn random_distribution_rows(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let mut m = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| 0.05 + rng.uniform()).collect()).unwrap();
    for i in 0..rows {
        let s: f64 = m.row(i).iter().sum();
        m.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    m
}

/// A target suited to `loss`, kept away from the MAE kink.
fn loss_target(loss: LossKind, output: &Matrix, rng: &mut Rng) -> Matrix {
    let (r, c) = output.shape();
    match loss {
        LossKind::Mse => random_matrix(r, c, rng),
        LossKind::Mae => {
            let t = random_matrix(r, c, rng);
            output
                .zip_map(&t, |o, t| {
                    if (o - t).abs() < KINK_MARGIN {
                        o + 10.0 * KINK_MARGIN
                    } else {
                        t
                    }
                })
                .unwrap()
        }
        LossKind::Bce => {
            let mut t = Matrix::zeros(r, c);
            for i in 0..r {
                t[(i, rng.below(c))] = 1.0;
            }
            t
        }
        LossKind::KlDivergence => random_distribution_rows(r, c, rng),
    }
}

/// Checks every network parameter.
fn check_network<F>(net: Network, input: &Matrix, loss: F) -> GradCheckReport
where
    F: Fn(&Matrix) -> (f64, Matrix),
{
    let template = net.clone();
    grad_check(
        |theta| {
            let mut net = template.clone();
            net.set_params(theta).unwrap();
            let trace = net.forward_trace(input).unwrap();
            let (l, g) = loss(&trace.output);
            let (grads, _) = net.backward(&trace, &g).unwrap();
            (l, grads.iter().flat_map(|g| g.flat()).collect())
        },
        &net.params(),
        DEFAULT_STEP,
        GRAD_TOLERANCE,
    )
}

/// Checks every network parameter and the input entries.
fn check_network_with_input<F>(net: Network, input: Matrix, loss: F) -> GradCheckReport
where
    F: Fn(&Matrix) -> (f64, Matrix),
{
    let n_params = net.param_count();
    let mut theta0 = net.params();
    theta0.extend_from_slice(input.as_slice());
    let (r, c) = input.shape();
    grad_check(
        |theta| {
            let mut net = net.clone();
            net.set_params(&theta[..n_params]).unwrap();
            let x = Matrix::from_vec(r, c, theta[n_params..].to_vec()).unwrap();
            let trace = net.forward_trace(&x).unwrap();
            let (l, g) = loss(&trace.output);
            let (grads, gx) = net.backward(&trace, &g).unwrap();
            let mut out: Vec<f64> = grads.iter().flat_map(|g| g.flat()).collect();
            out.extend(gx.into_vec());
            (l, out)
        },
        &theta0,
        DEFAULT_STEP,
        GRAD_TOLERANCE,
    )
}
