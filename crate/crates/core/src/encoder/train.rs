use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{clip_global_norm, Adam};
use super::tape::Mat;
use super::{EncoderAdapter, TrainConfig};
use crate::corpus::{gold_triggers, GoldTrigger, SentenceRecord};
use crate::decoding::{collect_candidates, group_questions, select_threshold, QuestionGroup, ThresholdConfig, ThresholdSelection};
use crate::error::{Error, Result};
use crate::ontology::EventOntology;
use crate::packing::{QaSetup, TrainingExample};

pub trait TrainableEncoder: EncoderAdapter + Clone {
    fn parameters_mut(&mut self) -> &mut [Mat];

    /// Mean over the batch of start plus end cross-entropy, and its gradient
    /// for every parameter in [`TrainableEncoder::parameters_mut`] order.
    fn loss_and_gradient(&self, batch: &[TrainingExample]) -> Result<(f64, Vec<Mat>)>;
}

/// Development questions with their gold triggers.
#[derive(Debug, Clone)]
pub struct DevSet {
    pub groups: Vec<QuestionGroup>,
    pub gold: Vec<GoldTrigger>,
    pub ontology: EventOntology,
}

impl DevSet {
    /// Every ontology question over `records`.
    pub fn new(setup: &QaSetup, records: &[SentenceRecord]) -> Result<Self> {
        let groups = group_questions(setup.instances(records)?);
        let gold = gold_triggers(records)
            .into_iter()
            .filter(|g| setup.ontology.contains(&g.event_type))
            .collect();
        Ok(DevSet {
            groups,
            gold,
            ontology: setup.ontology.clone(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Threshold selection for `adapter` on this set.
    pub fn evaluate(&self, adapter: &dyn EncoderAdapter, cfg: &ThresholdConfig) -> Result<ThresholdSelection> {
        let cands = collect_candidates(adapter, &self.groups, cfg)?;
        select_threshold(&cands, &self.gold, &self.ontology, &cfg.grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: f64,
    pub dev_threshold: f64,
    pub grid_f1: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<A> {
    /// Weights from the epoch with the best development F1.
    pub adapter: A,
    pub epochs: Vec<EpochMetrics>,
    /// 1-based; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

pub fn fine_tune<A: TrainableEncoder>(
    adapter: A,
    train: &[TrainingExample],
    dev: &DevSet,
    cfg: &TrainConfig,
    thresholds: &ThresholdConfig,
) -> Result<TrainOutcome<A>> {
    cfg.validate()?;
    thresholds.validate()?;
    if train.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    if cfg.max_epochs == 0 {
        return Ok(TrainOutcome {
            adapter,
            epochs: Vec::new(),
            best_epoch: None,
        });
    }
    if dev.is_empty() {
        return Err(Error::arg("development set is empty"));
    }

    let mut model = adapter;
    let mut adam = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, A)> = None;

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64)));
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (loss, mut grads) = model.loss_and_gradient(&batch)?;
            if !loss.is_finite() || grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
                let ids: Vec<String> = batch
                    .iter()
                    .map(|e| format!("{}/{}:{}", e.instance.doc_id, e.instance.sent_id, e.instance.event_type))
                    .collect();
                return Err(Error::Training(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {b} (lr {}), instances {}",
                    cfg.learning_rate,
                    ids.join(", ")
                )));
            }
            clip_global_norm(&mut grads, cfg.max_grad_norm);
            adam.update(model.parameters_mut(), &grads);
            loss_sum += loss;
            n_batches += 1;
        }
        let sel = dev.evaluate(&model, thresholds)?;
        epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            dev_f1: sel.best_f1,
            dev_threshold: sel.selected,
            grid_f1: sel.grid_f1,
        });
        if best.as_ref().is_none_or(|(f1, _, _)| sel.best_f1 > *f1) {
            best = Some((sel.best_f1, epoch, model.clone()));
        }
    }
    let (_, best_epoch, adapter) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        adapter,
        epochs,
        best_epoch: Some(best_epoch),
    })
}
