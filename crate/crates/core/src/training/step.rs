use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Batch, TrainError, TrainingConfig};
use crate::model::{decode_forward, encode, ForwardCtx, ModelParams};
use crate::numerics::{global_grad_norm, AdamState, Graph, NumericsError, Tensor};
use crate::text::UNK;

const DROPOUT_SALT: u64 = 0x6472_6f70_6f75_7401;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
    pub learning_rate: f64,
}

/// Base weights with redaction targets multiplied by `phi_weight`.
pub fn effective_weights(batch: &Batch, specials: &Range<usize>, phi_weight: f64) -> Vec<Vec<f64>> {
    batch
        .weights
        .iter()
        .zip(&batch.tgt)
        .map(|(w, t)| {
            w.iter()
                .zip(t)
                .map(|(&w, tgt)| if specials.contains(tgt) { w * phi_weight } else { w })
                .collect()
        })
        .collect()
}

/// Learning rate for the 1-based optimizer step `step`.
pub fn learning_rate_at(config: &TrainingConfig, step: u64) -> f64 {
    match config.warmup_steps {
        None => config.learning_rate,
        Some(w) => {
            let (s, w) = (step.max(1) as f64, w as f64);
            config.learning_rate * (s / w).min((w / s).sqrt())
        }
    }
}

/// Runs every row on its own tape. The loss is normalised by the weight
/// sum of the whole batch, so per-row losses and gradients simply add up.
/// With an rng, dropout is active and decoder inputs after BOS become UNK
/// with probability `input_noise`.
pub(super) fn forward_backward(
    params: &ModelParams,
    batch: &Batch,
    weights: &[Vec<f64>],
    mut dropout: Option<&mut ChaCha8Rng>,
    input_noise: f64,
    want_grads: bool,
) -> Result<(f64, Vec<Tensor>), TrainError> {
    let denom: f64 = weights.iter().flatten().sum();
    if !(denom > 0.0) {
        return Err(NumericsError::DegenerateWeights.into());
    }
    let rate = params.config().dropout_rate;
    let mut total = 0.0;
    let mut grads: Vec<Tensor> = Vec::new();
    for r in 0..batch.rows() {
        let mut tgt_in = batch.decoder_input(r);
        if let Some(rng) = dropout.as_deref_mut() {
            if input_noise > 0.0 {
                for t in &mut tgt_in[1..] {
                    if rng.random_bool(input_noise) {
                        *t = UNK;
                    }
                }
            }
        }
        let mut g = if want_grads { Graph::new() } else { Graph::inference() };
        let vars = params.bind(&mut g, want_grads);
        let mut ctx = match dropout.as_deref_mut() {
            Some(rng) => ForwardCtx::train(rate, rng),
            None => ForwardCtx::eval(),
        };
        let real = &batch.real[r];
        let c = encode(&mut g, params, &vars, &batch.src[r], real, &mut ctx)?;
        let y = decode_forward(&mut g, params, &vars, &tgt_in, real, c, real, &mut ctx)?;
        let loss = g.weighted_cross_entropy_with_denominator(y, &batch.tgt[r], &weights[r], denom)?;
        total += g.value(loss).item();
        if want_grads {
            let mut gr = g.backward(loss)?;
            if grads.is_empty() {
                grads = vars.iter().map(|&v| gr.take(v)).collect();
            } else {
                for (acc, &v) in grads.iter_mut().zip(&vars) {
                    acc.add_assign(&gr.take(v));
                }
            }
        }
    }
    Ok((total, grads))
}

/// Weighted loss of `batch` without dropout or parameter updates.
pub fn batch_loss(
    params: &ModelParams,
    batch: &Batch,
    specials: &Range<usize>,
    phi_weight: f64,
) -> Result<f64, TrainError> {
    let w = effective_weights(batch, specials, phi_weight);
    Ok(forward_backward(params, batch, &w, None, 0.0, false)?.0)
}

/// Weighted loss of `batch` and its gradient per parameter tensor, without
/// dropout or parameter updates.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &Batch,
    specials: &Range<usize>,
    phi_weight: f64,
) -> Result<(f64, Vec<Tensor>), TrainError> {
    let w = effective_weights(batch, specials, phi_weight);
    forward_backward(params, batch, &w, None, 0.0, true)
}

/// One optimizer step: teacher-forced forward with dropout, backward,
/// optional global-norm clipping, ADAM update. `global_step` is the
/// 0-based count of steps already taken; it seeds the dropout masks.
pub fn step(
    params: &mut ModelParams,
    adam: &mut AdamState,
    batch: &Batch,
    specials: &Range<usize>,
    config: &TrainingConfig,
    global_step: u64,
) -> Result<StepOutcome, TrainError> {
    let w = effective_weights(batch, specials, config.phi_weight);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ DROPOUT_SALT);
    rng.set_stream(global_step);
    let (loss, mut grads) = forward_backward(params, batch, &w, Some(&mut rng), config.decoder_input_dropout, true)?;
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            step: global_step,
            batch: batch.id,
            loss,
        });
    }
    let grad_norm = global_grad_norm(&grads);
    if let Some(clip) = config.grad_clip_norm {
        if grad_norm > clip {
            let s = clip / grad_norm;
            grads.iter_mut().for_each(|g| g.scale_in_place(s));
        }
    }
    let lr = learning_rate_at(config, adam.step_count + 1);
    let (names, tensors) = params.split_mut();
    adam.step_with_lr(tensors, &grads, names, lr)?;
    Ok(StepOutcome {
        loss,
        grad_norm,
        learning_rate: lr,
    })
}
