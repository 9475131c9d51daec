//! Packing `(question, context)` pairs into encoder inputs.
//!
//! Layout is `[CLS] question [SEP] context [SEP]`, segment 0 up to and
//! including the first `[SEP]`, segment 1 afterwards. Long contexts are split
//! into windows whose starts advance by `doc_stride` context subtokens.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, write_jsonl, SentenceRecord};
use crate::error::{Error, Result};
use crate::markers::{augment, AugmentedSentence, Direction, MarkerMode};
use crate::ontology::{EventOntology, QuestionStyle};
use crate::tokenizer::{SubToken, TokenizerAdapter, WordTokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackConfig {
    pub max_seq_len: usize,
    pub doc_stride: usize,
}

impl Default for PackConfig {
    fn default() -> Self {
        PackConfig {
            max_seq_len: 384,
            doc_stride: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub doc_id: String,
    pub sent_id: String,
    pub event_type: String,
    pub question: String,
    pub window_index: usize,
    pub input_ids: Vec<u32>,
    pub segment_ids: Vec<u8>,
    /// Display string per input position, markers included.
    pub tokens: Vec<String>,
    /// Input position of the first context subtoken.
    pub context_offset: usize,
    /// Range of context subtoken indices covered by this window.
    pub context_window: (usize, usize),
    /// Per context subtoken in the window, augmented character offsets.
    pub subtoken_offsets: Vec<(usize, usize)>,
    /// Per context subtoken in the window, original character offsets
    /// (`None` for marker subtokens).
    pub original_offsets: Vec<Option<(usize, usize)>>,
    pub original_text: String,
    /// Gold `(start, end)` input positions, inclusive.
    pub gold_answers: Vec<(usize, usize)>,
    pub cls_index: usize,
}

impl QAInstance {
    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    pub fn n_context(&self) -> usize {
        self.subtoken_offsets.len()
    }

    /// Input positions of the context segment.
    pub fn context_positions(&self) -> std::ops::Range<usize> {
        self.context_offset..self.context_offset + self.n_context()
    }

    /// Input positions of the question subtokens.
    pub fn question_positions(&self) -> std::ops::Range<usize> {
        1..self.context_offset - 1
    }

    /// True for context positions that may start or end an answer.
    pub fn is_answer_boundary(&self, pos: usize) -> bool {
        pos >= self.context_offset
            && pos < self.context_offset + self.n_context()
            && self.original_offsets[pos - self.context_offset].is_some()
    }

    pub fn original_offset(&self, pos: usize) -> Option<(usize, usize)> {
        pos.checked_sub(self.context_offset)
            .and_then(|i| self.original_offsets.get(i).copied().flatten())
    }
}

/// Packs one question against one augmented sentence.
pub fn pack(
    record: &SentenceRecord,
    aug: &AugmentedSentence,
    event_type: &str,
    question: &str,
    tok: &dyn TokenizerAdapter,
    cfg: &PackConfig,
) -> Result<Vec<QAInstance>> {
    if question.trim().is_empty() {
        return Err(Error::arg("question must be non-empty"));
    }
    let q = tok.subtokenize(question);
    let ctx = tok.subtokenize(&aug.text);

    for m in &aug.inserted {
        let ok = ctx
            .iter()
            .any(|s| s.start == m.char_pos && tok.is_reserved(s.id));
        if !ok {
            return Err(Error::arg(format!(
                "marker `{}` is not registered as a reserved token",
                m.token
            )));
        }
    }

    let overhead = q.len() + 3;
    if cfg.max_seq_len <= overhead {
        return Err(Error::arg(format!(
            "max_seq_len {} leaves no room for context after a {}-subtoken question",
            cfg.max_seq_len,
            q.len()
        )));
    }
    let max_ctx = cfg.max_seq_len - overhead;
    if cfg.doc_stride == 0 || cfg.doc_stride > max_ctx {
        return Err(Error::arg(format!(
            "doc_stride must lie in 1..={max_ctx}, got {}",
            cfg.doc_stride
        )));
    }

    let mut gold_ctx = Vec::new();
    for ev in record.events.iter().filter(|e| e.event_type == event_type) {
        let labeling = || Error::Labeling {
            event_id: ev.id.clone(),
            trigger: record
                .slice(ev.trigger_start, ev.trigger_end)
                .unwrap_or("")
                .to_string(),
        };
        let (s, e) = aug
            .remap_span(ev.trigger_start, ev.trigger_end, Direction::ToAugmented)
            .map_err(|_| labeling())?;
        let si = ctx.iter().position(|t| t.start == s).ok_or_else(labeling)?;
        let ei = ctx.iter().position(|t| t.end == e).ok_or_else(labeling)?;
        if ei < si {
            return Err(labeling());
        }
        gold_ctx.push((si, ei));
    }

    let original_offsets: Vec<Option<(usize, usize)>> = ctx
        .iter()
        .map(|t| {
            if tok.is_reserved(t.id) {
                None
            } else {
                aug.remap_span(t.start, t.end, Direction::ToOriginal).ok()
            }
        })
        .collect();

    let mut instances = Vec::new();
    let mut start = 0usize;
    loop {
        let end = (start + max_ctx).min(ctx.len());
        instances.push(build_window(
            record,
            event_type,
            question,
            tok,
            &q,
            &ctx,
            &original_offsets,
            &gold_ctx,
            instances.len(),
            (start, end),
        ));
        if end >= ctx.len() {
            break;
        }
        start += cfg.doc_stride;
    }
    Ok(instances)
}

#[allow(clippy::too_many_arguments)]
fn build_window(
    record: &SentenceRecord,
    event_type: &str,
    question: &str,
    tok: &dyn TokenizerAdapter,
    q: &[SubToken],
    ctx: &[SubToken],
    original_offsets: &[Option<(usize, usize)>],
    gold_ctx: &[(usize, usize)],
    window_index: usize,
    (start, end): (usize, usize),
) -> QAInstance {
    let mut input_ids = Vec::with_capacity(q.len() + end - start + 3);
    input_ids.push(tok.cls_id());
    input_ids.extend(q.iter().map(|s| s.id));
    input_ids.push(tok.sep_id());
    let context_offset = input_ids.len();
    let mut segment_ids = vec![0u8; context_offset];
    input_ids.extend(ctx[start..end].iter().map(|s| s.id));
    input_ids.push(tok.sep_id());
    segment_ids.resize(input_ids.len(), 1);

    let tokens = input_ids.iter().map(|&id| tok.token(id).to_string()).collect();
    let gold_answers = gold_ctx
        .iter()
        .filter(|&&(s, e)| s >= start && e < end)
        .map(|&(s, e)| (s - start + context_offset, e - start + context_offset))
        .collect();

    QAInstance {
        doc_id: record.doc_id.clone(),
        sent_id: record.sent_id.clone(),
        event_type: event_type.to_string(),
        question: question.to_string(),
        window_index,
        input_ids,
        segment_ids,
        tokens,
        context_offset,
        context_window: (start, end),
        subtoken_offsets: ctx[start..end].iter().map(|s| (s.start, s.end)).collect(),
        original_offsets: original_offsets[start..end].to_vec(),
        original_text: record.text.clone(),
        gold_answers,
        cls_index: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoAnswerPolicy {
    #[default]
    ClsTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub instance: Arc<QAInstance>,
    pub start_target: usize,
    pub end_target: usize,
}

/// One example per gold answer; unanswerable instances target `[CLS]`.
pub fn training_examples(instances: &[QAInstance], policy: NoAnswerPolicy) -> Vec<TrainingExample> {
    let mut out = Vec::new();
    for inst in instances {
        let shared = Arc::new(inst.clone());
        if inst.gold_answers.is_empty() {
            match policy {
                NoAnswerPolicy::ClsTarget => out.push(TrainingExample {
                    instance: shared,
                    start_target: inst.cls_index,
                    end_target: inst.cls_index,
                }),
            }
        } else {
            for &(s, e) in &inst.gold_answers {
                out.push(TrainingExample {
                    instance: Arc::clone(&shared),
                    start_target: s,
                    end_target: e,
                });
            }
        }
    }
    out
}

/// Keeps every answerable instance and each unanswerable one with
/// probability `keep_ratio`.
pub fn subsample_negatives(instances: Vec<QAInstance>, keep_ratio: f64, seed: u64) -> Vec<QAInstance> {
    if keep_ratio >= 1.0 {
        return instances;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    instances
        .into_iter()
        .filter(|i| !i.gold_answers.is_empty() || rng.random_bool(keep_ratio.max(0.0)))
        .collect()
}

pub fn save_instances(path: &Path, instances: &[QAInstance]) -> Result<()> {
    write_jsonl(path, instances)
}

pub fn load_instances(path: &Path) -> Result<Vec<QAInstance>> {
    read_jsonl(path)
}

/// Everything needed to turn records into encoder inputs.
#[derive(Debug, Clone)]
pub struct QaSetup {
    pub ontology: EventOntology,
    pub marker_mode: MarkerMode,
    pub question_style: QuestionStyle,
    pub tokenizer: WordTokenizer,
    pub pack: PackConfig,
}

/// A sentence augmented once and packed against every ontology question.
#[derive(Debug, Clone)]
pub struct PreparedSentence {
    pub aug: AugmentedSentence,
    pub instances: Vec<QAInstance>,
}

impl PreparedSentence {
    pub fn record(&self) -> &SentenceRecord {
        &self.aug.original
    }
}

impl QaSetup {
    /// Builds an uncased vocabulary over `records` and every question, then
    /// registers the marker inventory of `marker_records`.
    pub fn build(
        ontology: EventOntology,
        marker_mode: MarkerMode,
        question_style: QuestionStyle,
        records: &[SentenceRecord],
        marker_records: &[SentenceRecord],
        pack: PackConfig,
    ) -> Result<Self> {
        let questions: Vec<String> = ontology
            .all_questions(question_style)
            .into_iter()
            .map(|(_, q)| q)
            .collect();
        let mut tokenizer = WordTokenizer::build(
            records
                .iter()
                .map(|r| r.text.as_str())
                .chain(questions.iter().map(String::as_str)),
            true,
        );
        let inventory = crate::markers::marker_inventory(marker_records, marker_mode);
        tokenizer.register_reserved_tokens(&inventory)?;
        Ok(QaSetup {
            ontology,
            marker_mode,
            question_style,
            tokenizer,
            pack,
        })
    }

    pub fn prepare_for(&self, record: &SentenceRecord, event_types: &[String]) -> Result<PreparedSentence> {
        let aug = augment(record, self.marker_mode)?;
        let mut instances = Vec::new();
        for t in event_types {
            let q = self.ontology.question_for(t, self.question_style)?;
            instances.extend(pack(record, &aug, t, &q, &self.tokenizer, &self.pack)?);
        }
        Ok(PreparedSentence { aug, instances })
    }

    pub fn prepare(&self, record: &SentenceRecord) -> Result<PreparedSentence> {
        self.prepare_for(record, self.ontology.subtypes())
    }

    pub fn prepare_all(&self, records: &[SentenceRecord]) -> Result<Vec<PreparedSentence>> {
        records.iter().map(|r| self.prepare(r)).collect()
    }

    pub fn instances(&self, records: &[SentenceRecord]) -> Result<Vec<QAInstance>> {
        Ok(self
            .prepare_all(records)?
            .into_iter()
            .flat_map(|p| p.instances)
            .collect())
    }
}
