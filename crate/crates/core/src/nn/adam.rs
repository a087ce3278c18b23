//! Adam optimizer over a [`Parameters`] model.

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate must be positive, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Bias-corrected first/second moment accumulators, laid out flat in the
/// model's canonical group order.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self { t: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step<P: Parameters>(&mut self, cfg: &AdamConfig, params: &mut P, grads: &P) -> Result<()> {
        let grads = grads.groups();
        let mut target = params.groups_mut();
        let total: usize = target.iter().map(|(_, s)| s.len()).sum();
        if total != self.m.len() {
            return Err(Error::DimMismatch(format!(
                "optimizer state holds {} parameters, model has {total}",
                self.m.len()
            )));
        }
        if grads.len() != target.len() {
            return Err(Error::DimMismatch("gradient group count differs from model".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let mut offset = 0;
        for ((name, p), (_, g)) in target.iter_mut().zip(&grads) {
            if p.len() != g.len() {
                return Err(Error::DimMismatch(format!(
                    "gradient group {name} has {} entries, parameters have {}",
                    g.len(),
                    p.len()
                )));
            }
            for i in 0..p.len() {
                let gi = g[i];
                let m = &mut self.m[offset + i];
                let v = &mut self.v[offset + i];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
            offset += p.len();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseParams;

    fn scalar_params(v: f64) -> DenseParams {
        DenseParams {
            weight: crate::nn::tensor::Tensor2::from_data(1, 1, vec![v]).unwrap(),
            bias: vec![],
        }
    }

    #[test]
    fn first_step_magnitude_matches_hand_evaluation() {
        // g = 0.5: m_hat = g, v_hat = g^2, so |delta| = lr * g / (|g| + eps).
        let cfg = AdamConfig::default();
        let mut params = scalar_params(0.0);
        let grads = scalar_params(0.5);
        let mut state = AdamState::new(1);
        state.step(&cfg, &mut params, &grads).unwrap();
        let delta = params.weight.get(0, 0).abs();
        let expected = 1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((delta - expected).abs() < 1e-15, "delta {delta} vs {expected}");
        assert!((delta - 9.99e-4).abs() < 2e-6);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let cfg = AdamConfig::default();
        let mut params = scalar_params(1.25);
        let grads = scalar_params(0.0);
        let mut state = AdamState::new(1);
        for _ in 0..10 {
            state.step(&cfg, &mut params, &grads).unwrap();
        }
        assert_eq!(params.weight.get(0, 0), 1.25);
        assert_eq!(state.step_count(), 10);
    }

    #[test]
    fn updates_are_deterministic() {
        let cfg = AdamConfig::default();
        let run = || {
            let mut params = scalar_params(0.3);
            let mut state = AdamState::new(1);
            for k in 0..25 {
                let grads = scalar_params(0.1 * (k as f64 - 12.0));
                state.step(&cfg, &mut params, &grads).unwrap();
            }
            params.weight.get(0, 0)
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }

    #[test]
    fn rejects_mismatched_state() {
        let cfg = AdamConfig::default();
        let mut params = scalar_params(0.0);
        let grads = scalar_params(0.5);
        let mut state = AdamState::new(2);
        assert!(state.step(&cfg, &mut params, &grads).is_err());
    }
}
