use serde::{Deserialize, Serialize};

/// Optimizer settings and training-loop controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub holdout_fraction: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 1000,
            patience: 20,
            holdout_fraction: 0.2,
            restarts: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.learning_rate > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0
            && self.max_epochs > 0
            && self.restarts > 0
            && self.holdout_fraction > 0.0
            && self.holdout_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update; `t` is the 1-based step count.
pub fn adam_step(params: &mut [f64], grads: &[f64], moments: &mut Moments, t: u64, cfg: &TrainConfig) {
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        moments.m[i] = b1 * moments.m[i] + (1.0 - b1) * g;
        moments.v[i] = b2 * moments.v[i] + (1.0 - b2) * g * g;
        let mhat = moments.m[i] / c1;
        let vhat = moments.v[i] / c2;
        params[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0];
        let mut m = Moments::zeros(2);
        adam_step(&mut p, &[0.0, 0.0], &mut m, 1, &TrainConfig::default());
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig {
            epsilon: 1e-16,
            ..TrainConfig::default()
        };
        let mut p = vec![0.0, 0.0];
        let mut m = Moments::zeros(2);
        adam_step(&mut p, &[3.0, -0.01], &mut m, 1, &cfg);
        assert!((p[0] + 1e-3).abs() < 1e-12);
        assert!((p[1] - 1e-3).abs() < 1e-12);
    }
}
