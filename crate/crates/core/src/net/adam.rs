use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyperparameters.
///
/// Weight decay is coupled: `weight_decay · w` is added to the gradient before
/// the moment updates, i.e. plain L2 regularization seen through Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, weight_decay: 0.0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamConfig { learning_rate, weight_decay, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad Adam hyperparameters: {self:?}")))
        }
    }
}

/// Moment accumulators for a list of parameter tensors.
///
/// Accumulators are shaped on the first step and every later step must present
/// tensors of the same lengths.
#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState { config, first_moment: Vec::new(), second_moment: Vec::new(), step: 0 })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. Parameters are left untouched when any
    /// gradient entry is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid("parameter and gradient lists differ in length"));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::DimensionMismatch { expected: p.len(), got: g.len() });
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::TrainingDiverged {
                epoch: 0,
                reason: format!("non-finite gradient at step {}", self.step + 1),
            });
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != params.len()
            || self.first_moment.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::invalid("parameter shapes changed between Adam steps"));
        }

        self.step += 1;
        let AdamConfig { learning_rate, weight_decay, beta1, beta2, epsilon } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            for i in 0..p.len() {
                let grad = g[i] + weight_decay * p[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad;
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad * grad;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut state = AdamState::new(AdamConfig::new(0.1, 0.0)).unwrap();
        let mut w = vec![1.0, -2.0, 3.0];
        let zeros = vec![0.0; 3];
        for _ in 0..5 {
            state.step(&mut [w.as_mut_slice()], &[zeros.as_slice()]).unwrap();
        }
        assert_eq!(w, vec![1.0, -2.0, 3.0]);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let mut state = AdamState::new(AdamConfig::new(0.01, 0.0)).unwrap();
        let mut w = vec![0.5];
        state.step(&mut [w.as_mut_slice()], &[&[2.0]]).unwrap();
        assert!(w[0] < 0.5);
        // first bias-corrected step has magnitude lr·g/(|g|+eps) ≈ lr
        assert!((0.5 - w[0] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn quadratic_descent_matches_hand_recurrence() {
        // f(w) = (w-3)^2 from w = 0, lr = 0.1; reference recurrence written out longhand
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.1f64);
        let (mut w_ref, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=10 {
            let g = 2.0 * (w_ref - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w_ref -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }

        let mut state = AdamState::new(AdamConfig::new(lr, 0.0)).unwrap();
        let mut w = vec![0.0];
        for _ in 0..10 {
            let g = [2.0 * (w[0] - 3.0)];
            state.step(&mut [w.as_mut_slice()], &[&g]).unwrap();
        }
        assert!((w[0] - w_ref).abs() < 1e-12);
        assert!((w[0] - 3.0).abs() < 3.0);
        // ten steps of size ≈ lr move w close to 1.0
        assert!((w_ref - 1.0).abs() < 0.05, "{w_ref}");
    }

    #[test]
    fn coupled_weight_decay_shrinks_with_zero_gradient() {
        let mut state = AdamState::new(AdamConfig::new(0.01, 0.5)).unwrap();
        let mut w = vec![2.0, -2.0];
        state.step(&mut [w.as_mut_slice()], &[&[0.0, 0.0]]).unwrap();
        assert!(w[0] < 2.0 && w[1] > -2.0);
    }

    #[test]
    fn non_finite_gradient_is_divergence() {
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        let mut w = vec![1.0];
        let err = state.step(&mut [w.as_mut_slice()], &[&[f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::TrainingDiverged { .. }));
        assert_eq!(w, vec![1.0]);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn shape_changes_are_rejected() {
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        let mut a = vec![1.0, 2.0];
        state.step(&mut [a.as_mut_slice()], &[&[0.1, 0.1]]).unwrap();
        let mut b = vec![1.0];
        assert!(state.step(&mut [b.as_mut_slice()], &[&[0.1]]).is_err());
        assert!(AdamState::new(AdamConfig::new(-1.0, 0.0)).is_err());
    }
}
