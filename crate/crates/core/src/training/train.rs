use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{make_batches, step, EpochRecord, SelectionMetric, StepOutcome, TrainError, TrainingConfig, TrainingPair};
use crate::data::{to_training_pair, LabeledDocument};
use crate::evaluation::evaluate_corpus;
use crate::inference::DeidOptions;
use crate::model::{Checkpoint, ModelConfig, ModelParams};
use crate::numerics::AdamState;
use crate::text::Vocabulary;

/// Resume bookkeeping stored in checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub global_step: u64,
    pub epochs_completed: usize,
    /// Best validation score so far, as compared by the selection metric.
    pub best_score: Option<(f64, f64)>,
    pub best_epoch: Option<usize>,
    pub epochs_without_improvement: usize,
}

/// Callbacks fired during [`Trainer::fit`]; an error aborts training.
pub trait TrainObserver {
    fn on_epoch(&mut self, _record: &EpochRecord, _trainer: &Trainer) -> Result<(), TrainError> {
        Ok(())
    }

    /// Fired every `checkpoint_every` steps.
    fn on_checkpoint(&mut self, _trainer: &Trainer) -> Result<(), TrainError> {
        Ok(())
    }
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Owns the parameters and optimizer state of one training run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainingConfig,
    pub params: ModelParams,
    pub adam: AdamState,
    pub state: TrainerState,
    best: Option<ModelParams>,
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch (initial ones if none ran).
    pub best: ModelParams,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// Final state, including the last-epoch parameters.
    pub trainer: Trainer,
}

/// Early-stopping score, compared lexicographically. Undefined values rank
/// below every defined one.
fn score(record: &EpochRecord, metric: SelectionMetric) -> (f64, f64) {
    let recall = record.val_recall.unwrap_or(-1.0);
    let f1 = record.val_f1.unwrap_or(-1.0);
    match metric {
        SelectionMetric::Recall => (recall, f1),
        SelectionMetric::F1 => (f1, recall),
        SelectionMetric::F2 => {
            let f2 = match (record.val_precision, record.val_recall) {
                (Some(p), Some(r)) if p + r > 0.0 => 5.0 * p * r / (4.0 * p + r),
                (Some(_), Some(_)) => 0.0,
                _ => -1.0,
            };
            (f2, recall)
        }
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_add((epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl Trainer {
    /// Fresh parameters initialised from `config.seed`.
    pub fn new(model: &ModelConfig, config: TrainingConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let params = ModelParams::init(model, config.seed)?;
        let adam = AdamState::new(config.adam(), params.tensors());
        Ok(Self {
            config,
            params,
            adam,
            state: TrainerState::default(),
            best: None,
        })
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`].
    pub fn from_checkpoint(ck: Checkpoint, config: TrainingConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let adam = ck
            .optimizer
            .ok_or_else(|| TrainError::Config("checkpoint has no optimizer state to resume from".into()))?;
        let state: TrainerState = match ck.trainer_state {
            Some(v) => serde_json::from_value(v).map_err(|e| TrainError::Config(format!("bad trainer state: {e}")))?,
            None => return Err(TrainError::Config("checkpoint has no trainer state to resume from".into())),
        };
        Ok(Self {
            config,
            params: ck.params,
            adam,
            state,
            best: None,
        })
    }

    /// Resumable snapshot of the current parameters.
    pub fn checkpoint(&self, vocab_hash: &str) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            vocab_hash: vocab_hash.to_string(),
            optimizer: Some(self.adam.clone()),
            trainer_state: Some(serde_json::to_value(&self.state).expect("trainer state serialises")),
        }
    }

    pub fn best_params(&self) -> &ModelParams {
        self.best.as_ref().unwrap_or(&self.params)
    }

    pub fn step(&mut self, batch: &super::Batch, specials: &Range<usize>) -> Result<StepOutcome, TrainError> {
        let out = step(
            &mut self.params,
            &mut self.adam,
            batch,
            specials,
            &self.config,
            self.state.global_step,
        )?;
        self.state.global_step += 1;
        Ok(out)
    }

    fn steps_exhausted(&self) -> bool {
        self.config.max_steps.is_some_and(|m| self.state.global_step >= m)
    }

    /// Epoch loop with per-epoch validation, best-epoch tracking and early
    /// stopping on the configured selection metric.
    pub fn fit(
        mut self,
        train_docs: &[LabeledDocument],
        validation: &[LabeledDocument],
        vocab: &Vocabulary,
        observer: &mut dyn TrainObserver,
    ) -> Result<TrainOutcome, TrainError> {
        if train_docs.is_empty() || validation.is_empty() {
            return Err(TrainError::Config(format!(
                "training needs non-empty train and validation splits (got {} and {})",
                train_docs.len(),
                validation.len()
            )));
        }
        let cfg = self.params.config().clone();
        if cfg.vocab_size != vocab.len() {
            return Err(TrainError::Config(format!(
                "model vocab_size {} differs from vocabulary size {}",
                cfg.vocab_size,
                vocab.len()
            )));
        }
        let pairs: Vec<TrainingPair> = train_docs
            .iter()
            .flat_map(|d| to_training_pair(d, vocab).chunks(cfg.max_len))
            .collect();
        let specials = vocab.redaction_ids();
        let mut eval_options = DeidOptions::default();
        eval_options.window_overlap = eval_options.window_overlap.map(|o| o.min(cfg.max_len / 4));

        let mut log = Vec::new();
        let mut stopped_early = false;
        for epoch in self.state.epochs_completed..self.config.max_epochs {
            if self.steps_exhausted() {
                break;
            }
            let batches = make_batches(&pairs, self.config.batch_size, epoch_seed(self.config.seed, epoch));
            let mut losses = Vec::with_capacity(batches.len());
            for b in &batches {
                if self.steps_exhausted() {
                    break;
                }
                losses.push(self.step(b, &specials)?.loss);
                if let Some(every) = self.config.checkpoint_every {
                    if self.state.global_step % every == 0 {
                        observer.on_checkpoint(&self)?;
                    }
                }
            }
            let train_loss = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
            let eval = evaluate_corpus(&self.params, vocab, validation, &eval_options)
                .map_err(|e| TrainError::Validation(e.to_string()))?;
            let r = &eval.report;
            let record = EpochRecord {
                step: self.state.global_step,
                epoch: epoch + 1,
                train_loss,
                val_precision: r.precision(),
                val_recall: r.recall(),
                val_f1: r.f1(),
            };
            let s = score(&record, self.config.selection);
            if self.state.best_score.is_none_or(|b| s > b) {
                self.state.best_score = Some(s);
                self.state.best_epoch = Some(epoch + 1);
                self.state.epochs_without_improvement = 0;
                self.best = Some(self.params.clone());
            } else {
                self.state.epochs_without_improvement += 1;
            }
            self.state.epochs_completed = epoch + 1;
            log.push(record);
            observer.on_epoch(&record, &self)?;
            if self
                .config
                .patience
                .is_some_and(|p| self.state.epochs_without_improvement >= p)
            {
                stopped_early = true;
                break;
            }
        }
        Ok(TrainOutcome {
            best: self.best_params().clone(),
            best_epoch: self.state.best_epoch,
            log,
            stopped_early,
            trainer: self,
        })
    }
}

/// Initialises a model and runs [`Trainer::fit`].
pub fn train(
    train_docs: &[LabeledDocument],
    validation: &[LabeledDocument],
    vocab: &Vocabulary,
    model: &ModelConfig,
    config: &TrainingConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome, TrainError> {
    Trainer::new(model, config.clone())?.fit(train_docs, validation, vocab, observer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: Option<f64>, r: Option<f64>, f1: Option<f64>) -> EpochRecord {
        EpochRecord {
            step: 1,
            epoch: 1,
            train_loss: 1.0,
            val_precision: p,
            val_recall: r,
            val_f1: f1,
        }
    }

    #[test]
    fn redact_all_loses_to_a_precise_model_under_f2_but_not_recall() {
        // Redacting everything at 16% PHI density against a model at P 0.9, R 0.97.
        let all = rec(Some(0.16), Some(1.0), Some(0.2759));
        let good = rec(Some(0.9), Some(0.97), Some(0.9337));
        assert!(score(&good, SelectionMetric::F2) > score(&all, SelectionMetric::F2));
        assert!(score(&good, SelectionMetric::F1) > score(&all, SelectionMetric::F1));
        assert!(score(&good, SelectionMetric::Recall) < score(&all, SelectionMetric::Recall));
        let f2 = score(&good, SelectionMetric::F2).0;
        assert!((f2 - 5.0 * 0.9 * 0.97 / (4.0 * 0.9 + 0.97)).abs() < 1e-15);
    }

    #[test]
    fn undefined_scores_rank_last() {
        let undefined = rec(None, Some(0.5), None);
        let zero = rec(Some(0.0), Some(0.0), Some(0.0));
        assert_eq!(score(&undefined, SelectionMetric::F2).0, -1.0);
        assert_eq!(score(&zero, SelectionMetric::F2).0, 0.0);
    }
}
