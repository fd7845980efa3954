//! Teacher-forced training with weighted cross-entropy and ADAM.

mod batch;
mod log;
mod step;
mod train;

pub use batch::{make_batches, Batch};
pub use log::{parse_log, EpochRecord};
pub use step::{batch_gradients, batch_loss, effective_weights, learning_rate_at, step, StepOutcome};
pub use train::{train, NoObserver, TrainObserver, TrainOutcome, Trainer, TrainerState};

use serde::{Deserialize, Serialize};

use crate::model::ModelError;
use crate::numerics::{AdamConfig, NumericsError};

/// Source ids, their copy-or-redact targets and per-position base weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub src_ids: Vec<usize>,
    pub tgt_ids: Vec<usize>,
    pub weights: Vec<f64>,
}

impl TrainingPair {
    pub fn len(&self) -> usize {
        self.src_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_ids.is_empty()
    }

    /// Splits into consecutive chunks of at most `max_len` positions.
    pub fn chunks(&self, max_len: usize) -> Vec<TrainingPair> {
        (0..self.len())
            .step_by(max_len.max(1))
            .map(|s| {
                let e = (s + max_len).min(self.len());
                TrainingPair {
                    src_ids: self.src_ids[s..e].to_vec(),
                    tgt_ids: self.tgt_ids[s..e].to_vec(),
                    weights: self.weights[s..e].to_vec(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Optional hard cap on optimizer steps across all epochs.
    pub max_steps: Option<u64>,
    /// Loss weight of positions whose target is a redaction special.
    pub phi_weight: f64,
    pub seed: u64,
    /// Emit a resumable checkpoint every this many steps.
    pub checkpoint_every: Option<u64>,
    pub grad_clip_norm: Option<f64>,
    /// Inverse-square-root warmup length in steps; constant rate when absent.
    pub warmup_steps: Option<u64>,
    /// Epochs without validation improvement before stopping; never when absent.
    pub patience: Option<usize>,
    /// Validation score that picks the best epoch and drives early stopping.
    pub selection: SelectionMetric,
    /// Probability of replacing each previous-target token fed to the
    /// decoder (after BOS) with UNK during training.
    pub decoder_input_dropout: f64,
}

/// Model-selection score computed on the validation split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    /// Token recall, F1 breaking ties. Rewards redacting everything.
    Recall,
    F1,
    /// F-beta with beta = 2: recall weighted four times precision.
    #[default]
    F2,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            max_epochs: 20,
            max_steps: None,
            phi_weight: 5.0,
            seed: 0,
            checkpoint_every: None,
            grad_clip_norm: Some(1.0),
            warmup_steps: None,
            patience: Some(3),
            selection: SelectionMetric::default(),
            decoder_input_dropout: 0.0,
        }
    }
}

impl TrainingConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: String| Err(TrainError::Config(m));
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.phi_weight >= 1.0) || !self.phi_weight.is_finite() {
            return fail(format!("phi_weight must be at least 1, got {}", self.phi_weight));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return fail("ADAM betas must lie in [0, 1) and epsilon must be positive".into());
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0) {
                return fail(format!("grad_clip_norm must be positive, got {c}"));
            }
        }
        if !(0.0..1.0).contains(&self.decoder_input_dropout) {
            return fail(format!("decoder_input_dropout must lie in [0, 1), got {}", self.decoder_input_dropout));
        }
        if matches!(self.checkpoint_every, Some(0)) || matches!(self.warmup_steps, Some(0)) {
            return fail("checkpoint_every and warmup_steps must be positive when set".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss {loss} at step {step} (batch {batch})")]
    NonFiniteLoss { step: u64, batch: usize, loss: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Observer(String),
}
