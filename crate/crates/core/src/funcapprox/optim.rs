use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{check_len, Error, Result};

/// Hyperparameters for [`Adam`]. Defaults follow common PPO practice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moment estimates for one [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, len: usize) -> Result<Self> {
        let ok = |b: f64| b > 0.0 && b < 1.0;
        if !ok(config.beta1) || !ok(config.beta2) {
            return Err(Error::InvalidArgument("Adam betas must lie in (0, 1)".into()));
        }
        if !(config.learning_rate > 0.0) || !(config.epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "Adam learning rate and epsilon must be positive".into(),
            ));
        }
        Ok(Self {
            config,
            step_count: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Descend along `params.grads`, then zero the gradients.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        check_len("optimizer state", self.first_moment.len(), params.len())?;
        if let Some(index) = params.grads().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let (values, grads) = (params.values.as_mut_slice(), params.grads.as_mut_slice());
        for (((p, g), m), v) in values
            .iter_mut()
            .zip(grads.iter_mut())
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * *g;
            *v = beta2 * *v + (1.0 - beta2) * *g * *g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            *g = 0.0;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ParamStore::from_values(vec![1.0, -2.0]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), 2).unwrap();
        opt.step(&mut p).unwrap();
        assert_eq!(p.values(), &[1.0, -2.0]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = ParamStore::from_values(vec![0.5]).unwrap();
        p.grads_mut()[0] = 1.0;
        let mut opt = Adam::new(AdamConfig::default(), 1).unwrap();
        assert_eq!(opt.config().learning_rate, 3e-4);
        opt.step(&mut p).unwrap();
        // m_hat = v_hat = 1 at t = 1, so the step is lr / (1 + eps).
        let expected = 0.5 - 3e-4 / (1.0 + 1e-8);
        assert!((p.values()[0] - expected).abs() < 1e-15);
        assert_eq!(p.grads(), &[0.0]);
    }

    #[test]
    fn non_finite_gradient_names_index() {
        let mut p = ParamStore::zeros(3);
        p.grads_mut()[1] = f64::NAN;
        p.grads_mut()[2] = f64::INFINITY;
        let mut opt = Adam::new(AdamConfig::default(), 3).unwrap();
        assert!(matches!(opt.step(&mut p), Err(Error::NonFiniteGradient { index: 1 })));
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn rejects_bad_betas() {
        let cfg = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(Adam::new(cfg, 1).is_err());
    }
}
