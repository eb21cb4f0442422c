use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid(format!(
                "Adam betas must lie in [0, 1): beta1={}, beta2={}",
                self.beta1, self.beta2
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::invalid("Adam learning rate and epsilon must be positive"));
        }
        Ok(())
    }
}

/// Bias-corrected Adam over a fixed list of parameter blocks.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, block_sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step_count: 0,
            first_moment: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.first_moment.iter().map(Vec::len).collect()
    }

    /// One update of every block. Validation happens before anything is mutated.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::invalid(format!(
                "Adam tracks {} blocks, got {} parameter and {} gradient blocks",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        for (b, (p, g)) in params.iter().zip(grads).enumerate() {
            let expected = self.first_moment[b].len();
            if p.len() != expected || g.len() != expected {
                return Err(Error::invalid(format!(
                    "Adam block {b}: expected {expected} entries, params {} grads {}",
                    p.len(),
                    g.len()
                )));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient block {b}, entry {i}")));
            }
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first_moment[b];
            let v = &mut self.second_moment[b];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Single-block convenience wrapper over [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.step(&mut [params], &[grads])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut st = AdamState::new(AdamConfig::default(), &[3]).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        for k in 1..=5 {
            adam_step(&mut st, &mut p, &[0.0; 3]).unwrap();
            assert_eq!(st.step_count(), k);
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut st = AdamState::new(AdamConfig::default(), &[1]).unwrap();
        let mut p = vec![1.0];
        adam_step(&mut st, &mut p, &[2.0]).unwrap();
        // m̂ = 2, v̂ = 4, Δ = 0.01 · 2 / (2 + 1e-8)
        let expected = 1.0 - 0.01 * 2.0 / (2.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn repeated_steps_descend_monotonically() {
        let mut st = AdamState::new(AdamConfig::default(), &[1]).unwrap();
        let mut p = vec![0.0];
        adam_step(&mut st, &mut p, &[-3.0]).unwrap();
        let after1 = p[0];
        adam_step(&mut st, &mut p, &[-3.0]).unwrap();
        assert!(after1 > 0.0 && p[0] > after1);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut st = AdamState::new(AdamConfig::default(), &[1, 2]).unwrap();
        let mut a = vec![0.0];
        let mut b = vec![0.0, 0.0];
        let err = st.step(&mut [&mut a, &mut b], &[&[0.0], &[1.0, f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("block 1"), "{err}");
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut st = AdamState::new(AdamConfig::default(), &[2]).unwrap();
        let mut p = vec![0.0; 3];
        assert!(adam_step(&mut st, &mut p, &[0.0; 3]).is_err());
    }

    #[test]
    fn invalid_beta_rejected() {
        let cfg = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(cfg, &[1]).is_err());
    }
}
