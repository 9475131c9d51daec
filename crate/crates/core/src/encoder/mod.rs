//! Encoder adapters: span scores over a packed instance, fine-tuning,
//! `[CLS]` embeddings and input-embedding gradients.

mod mock;
mod optim;
pub mod tape;
mod train;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packing::QAInstance;
use crate::tokenizer::TokenizerAdapter;

pub use mock::{mock_encoder, MockConfig, MockEncoder};
pub use optim::Adam;
pub use tape::Mat;
pub use train::{fine_tune, DevSet, EpochMetrics, TrainOutcome, TrainableEncoder};

/// Checkpoint identifiers that name real pretrained QA encoders.
pub const PRETRAINED_CHECKPOINTS: &[&str] = &[
    "bert-base-uncased",
    "bert-base-cased",
    "bert-large-uncased",
    "bert-large-cased",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SpanScores {
    pub start_logits: Vec<f64>,
    pub end_logits: Vec<f64>,
    pub start_probs: Vec<f64>,
    pub end_probs: Vec<f64>,
}

impl SpanScores {
    /// Softmax over every input position.
    pub fn from_logits(start_logits: Vec<f64>, end_logits: Vec<f64>) -> Self {
        assert_eq!(start_logits.len(), end_logits.len(), "one logit per position");
        let mut start_probs = start_logits.clone();
        let mut end_probs = end_logits.clone();
        tape::softmax_in_place(&mut start_probs);
        tape::softmax_in_place(&mut end_probs);
        SpanScores {
            start_logits,
            end_logits,
            start_probs,
            end_probs,
        }
    }

    pub fn len(&self) -> usize {
        self.start_logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start_logits.is_empty()
    }
}

/// Picks one output logit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitSelector {
    Start(usize),
    End(usize),
}

impl LogitSelector {
    pub fn position(self) -> usize {
        match self {
            LogitSelector::Start(p) | LogitSelector::End(p) => p,
        }
    }
}

pub trait EncoderAdapter {
    fn checkpoint_id(&self) -> &str;

    fn forward(&self, instance: &QAInstance) -> Result<SpanScores>;

    fn forward_batch(&self, batch: &[QAInstance]) -> Result<Vec<SpanScores>> {
        batch.iter().map(|inst| self.forward(inst)).collect()
    }

    /// Input embedding vectors, one row per position.
    fn embed_inputs(&self, instance: &QAInstance) -> Result<Mat>;

    /// Span scores computed from explicit input embeddings instead of token ids.
    fn forward_from_embeddings(&self, instance: &QAInstance, inputs: &Mat) -> Result<SpanScores> {
        let _ = (instance, inputs);
        Err(Error::Capability(format!(
            "encoder `{}` cannot run from input embeddings",
            self.checkpoint_id()
        )))
    }

    /// Gradient of the selected pre-softmax logit w.r.t. the input embeddings.
    fn gradient_of(&self, instance: &QAInstance, selector: LogitSelector) -> Result<Mat> {
        let _ = (instance, selector);
        Err(Error::Capability(format!(
            "encoder `{}` does not expose input-embedding gradients",
            self.checkpoint_id()
        )))
    }

    fn cls_embedding(&self, instance: &QAInstance) -> Result<Vec<f64>>;

    /// Adds one learnable row per token not yet registered; returns how many.
    fn register_reserved_tokens(&mut self, tokens: &[String]) -> usize;

    fn vocab_size(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub device: String,
    pub max_grad_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-5,
            batch_size: 12,
            max_epochs: 3,
            seed: 42,
            device: "cpu".into(),
            max_grad_norm: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                field: field.into(),
                message: message.into(),
            })
        };
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", "must be a positive finite number");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm", "must be positive");
        }
        if self.device != "cpu" {
            return bad("device", "only `cpu` is available");
        }
        Ok(())
    }
}

/// Token ids the lexical-match feature should ignore: pieces shared by at
/// least half of the questions (template words) and non-alphanumeric pieces.
pub fn lexical_match_exclusions(tokenizer: &dyn TokenizerAdapter, questions: &[String]) -> Vec<u32> {
    let mut counts = std::collections::BTreeMap::<u32, usize>::new();
    let mut out = BTreeSet::new();
    for q in questions {
        let ids: BTreeSet<u32> = tokenizer.subtokenize(q).into_iter().map(|s| s.id).collect();
        for id in ids {
            *counts.entry(id).or_default() += 1;
            if !tokenizer.token(id).chars().any(char::is_alphanumeric) {
                out.insert(id);
            }
        }
    }
    for (id, c) in counts {
        if 2 * c >= questions.len() {
            out.insert(id);
        }
    }
    out.insert(tokenizer.unk_id());
    out.into_iter().collect()
}
