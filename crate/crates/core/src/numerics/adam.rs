use serde::{Deserialize, Serialize};

use super::{NumericsError, Tensor};

/// ADAM hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for every trainable tensor, in parameter order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            step_count: 0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    /// One bias-corrected update at the configured learning rate.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor], names: &[String]) -> Result<(), NumericsError> {
        self.step_with_lr(params, grads, names, self.config.learning_rate)
    }

    /// One update at an explicit learning rate (for schedules). Nothing is
    /// modified if any gradient entry is non-finite.
    pub fn step_with_lr(
        &mut self,
        params: &mut [Tensor],
        grads: &[Tensor],
        names: &[String],
        lr: f64,
    ) -> Result<(), NumericsError> {
        if !(lr > 0.0) {
            return Err(NumericsError::LearningRate(lr));
        }
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(NumericsError::OptimizerMismatch(format!(
                "{} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first_moment[i].shape() {
                return Err(NumericsError::OptimizerMismatch(format!(
                    "parameter {i}: {:?} vs gradient {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            if !g.is_finite() {
                let name = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
                return Err(NumericsError::NonFiniteGradient(name));
            }
        }

        self.step_count += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
            for j in 0..pd.len() {
                let gj = g.data()[j];
                md[j] = beta1 * md[j] + (1.0 - beta1) * gj;
                vd[j] = beta2 * vd[j] + (1.0 - beta2) * gj * gj;
                let m_hat = md[j] / c1;
                let v_hat = vd[j] / c2;
                pd[j] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// `sqrt(Σ‖g‖²)` over all gradient tensors.
pub fn global_grad_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(Tensor::squared_norm).sum::<f64>().sqrt()
}
