//! n-best span search, containment dedup, threshold selection and decoding
//! of trigger predictions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, GoldTrigger, SentenceRecord};
use crate::encoder::{EncoderAdapter, SpanScores};
use crate::error::{Error, Result};
use crate::evaluation::score;
use crate::ontology::EventOntology;
use crate::packing::{QAInstance, QaSetup};

pub const DEFAULT_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCandidate {
    /// Inclusive input positions within the window the span came from.
    pub start_subtoken: usize,
    pub end_subtoken: usize,
    pub window_index: usize,
    pub probability: f64,
    /// Original (unaugmented) character offsets.
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl SpanCandidate {
    pub fn contains(&self, other: &SpanCandidate) -> bool {
        self.char_start <= other.char_start && other.char_end <= self.char_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub grid: Vec<f64>,
    pub selected: f64,
    pub n_best: usize,
    pub max_answer_subtokens: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            grid: DEFAULT_GRID.to_vec(),
            selected: 0.2,
            n_best: 10,
            max_answer_subtokens: 8,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                field: field.into(),
                message: message.into(),
            })
        };
        if self.grid.is_empty() || self.grid.iter().any(|t| !t.is_finite()) {
            return bad("grid", "must be a non-empty list of finite thresholds");
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid", "must be strictly ascending");
        }
        if !self.selected.is_finite() {
            return bad("selected", "must be finite");
        }
        if self.n_best == 0 {
            return bad("n_best", "must be positive");
        }
        if self.max_answer_subtokens == 0 {
            return bad("max_answer_subtokens", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerPrediction {
    pub doc_id: String,
    pub sent_id: String,
    pub event_type: String,
    #[serde(rename = "start")]
    pub char_start: usize,
    #[serde(rename = "end")]
    pub char_end: usize,
    pub text: String,
    pub probability: f64,
}

pub fn save_predictions(path: &std::path::Path, predictions: &[TriggerPrediction]) -> Result<()> {
    crate::corpus::write_jsonl(path, predictions)
}

pub fn load_predictions(path: &std::path::Path) -> Result<Vec<TriggerPrediction>> {
    crate::corpus::read_jsonl(path)
}

/// Ranking key: higher probability first, then earlier start, then shorter.
fn rank(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then((a.2 - a.1).cmp(&(b.2 - b.1)))
}

#[derive(PartialEq)]
struct Ranked(f64, usize, usize);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    // the worst-ranked span is the heap maximum
    fn cmp(&self, other: &Self) -> Ordering {
        rank((self.0, self.1, self.2), (other.0, other.1, other.2))
    }
}

/// The `n_best` most probable valid spans of one window, best first.
pub fn n_best_spans(scores: &SpanScores, instance: &QAInstance, cfg: &ThresholdConfig) -> Vec<SpanCandidate> {
    assert_eq!(scores.len(), instance.len(), "scores must cover every input position");
    let boundaries: Vec<usize> = instance
        .context_positions()
        .filter(|&p| instance.is_answer_boundary(p))
        .collect();
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(cfg.n_best + 1);
    for (i, &s) in boundaries.iter().enumerate() {
        let ps = scores.start_probs[s];
        for &e in boundaries[i..].iter().take_while(|&&e| e - s < cfg.max_answer_subtokens) {
            let cand = Ranked(ps * scores.end_probs[e], s, e);
            if heap.len() < cfg.n_best {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    heap.into_sorted_vec()
        .into_iter()
        .map(|Ranked(p, s, e)| {
            let (cs, _) = instance.original_offset(s).expect("boundary has an original offset");
            let (_, ce) = instance.original_offset(e).expect("boundary has an original offset");
            SpanCandidate {
                start_subtoken: s,
                end_subtoken: e,
                window_index: instance.window_index,
                probability: p,
                char_start: cs,
                char_end: ce,
                text: char_slice(&instance.original_text, cs, ce).unwrap_or_default().to_string(),
            }
        })
        .collect()
}

/// Drops every candidate whose span contains or is contained by a
/// higher-ranked survivor. Input must be sorted best first.
pub fn dedup_contained(candidates: Vec<SpanCandidate>) -> Vec<SpanCandidate> {
    let mut kept: Vec<SpanCandidate> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if !kept.iter().any(|k| k.contains(&c) || c.contains(k)) {
            kept.push(c);
        }
    }
    kept
}

/// Windows of one (sentence, event type) question.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionGroup {
    pub doc_id: String,
    pub sent_id: String,
    pub event_type: String,
    pub instances: Vec<QAInstance>,
}

/// Groups instances sharing (doc, sentence, event type), keeping first-seen order.
pub fn group_questions(instances: Vec<QAInstance>) -> Vec<QuestionGroup> {
    let mut groups: Vec<QuestionGroup> = Vec::new();
    let mut index: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for inst in instances {
        let key = (inst.doc_id.clone(), inst.sent_id.clone(), inst.event_type.clone());
        match index.get(&key) {
            Some(&g) => groups[g].instances.push(inst),
            None => {
                index.insert(key, groups.len());
                groups.push(QuestionGroup {
                    doc_id: inst.doc_id.clone(),
                    sent_id: inst.sent_id.clone(),
                    event_type: inst.event_type.clone(),
                    instances: vec![inst],
                });
            }
        }
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionCandidates {
    pub doc_id: String,
    pub sent_id: String,
    pub event_type: String,
    pub candidates: Vec<SpanCandidate>,
}

/// Merges the n-best lists of every window of one question: identical
/// character spans keep their best probability, then containment dedup.
pub fn merge_windows(per_window: Vec<Vec<SpanCandidate>>) -> Vec<SpanCandidate> {
    let mut best: BTreeMap<(usize, usize), SpanCandidate> = BTreeMap::new();
    for c in per_window.into_iter().flatten() {
        match best.get(&(c.char_start, c.char_end)) {
            Some(prev) if prev.probability >= c.probability => {}
            _ => {
                best.insert((c.char_start, c.char_end), c);
            }
        }
    }
    let mut merged: Vec<SpanCandidate> = best.into_values().collect();
    merged.sort_by(|a, b| rank((a.probability, a.char_start, a.char_end), (b.probability, b.char_start, b.char_end)));
    dedup_contained(merged)
}

pub fn question_candidates(
    adapter: &dyn EncoderAdapter,
    group: &QuestionGroup,
    cfg: &ThresholdConfig,
) -> Result<QuestionCandidates> {
    let per_window = group
        .instances
        .iter()
        .map(|inst| Ok(n_best_spans(&adapter.forward(inst)?, inst, cfg)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuestionCandidates {
        doc_id: group.doc_id.clone(),
        sent_id: group.sent_id.clone(),
        event_type: group.event_type.clone(),
        candidates: merge_windows(per_window),
    })
}

pub fn collect_candidates(
    adapter: &dyn EncoderAdapter,
    groups: &[QuestionGroup],
    cfg: &ThresholdConfig,
) -> Result<Vec<QuestionCandidates>> {
    groups.iter().map(|g| question_candidates(adapter, g, cfg)).collect()
}

/// Every candidate with probability ≥ `threshold`.
pub fn predictions_at(questions: &[QuestionCandidates], threshold: f64) -> Vec<TriggerPrediction> {
    questions
        .iter()
        .flat_map(|q| {
            q.candidates
                .iter()
                .filter(move |c| c.probability >= threshold)
                .map(move |c| TriggerPrediction {
                    doc_id: q.doc_id.clone(),
                    sent_id: q.sent_id.clone(),
                    event_type: q.event_type.clone(),
                    char_start: c.char_start,
                    char_end: c.char_end,
                    text: c.text.clone(),
                    probability: c.probability,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    /// (threshold, F1) for every grid point, in iteration order.
    pub grid_f1: Vec<(f64, f64)>,
    pub selected: f64,
    pub best_f1: f64,
}

/// Walks the grid in ascending order and keeps a threshold whenever its F1
/// is at least the best so far, so the largest threshold wins ties.
pub fn select_threshold_by<F: FnMut(f64) -> f64>(grid: &[f64], mut f1_at: F) -> Result<ThresholdSelection> {
    if grid.is_empty() {
        return Err(Error::arg("threshold grid is empty"));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best_f1 = f64::NEG_INFINITY;
    let mut selected = sorted[0];
    let mut grid_f1 = Vec::with_capacity(sorted.len());
    for t in sorted {
        let f1 = f1_at(t);
        grid_f1.push((t, f1));
        if f1 >= best_f1 {
            best_f1 = f1;
            selected = t;
        }
    }
    Ok(ThresholdSelection {
        grid_f1,
        selected,
        best_f1,
    })
}

/// Threshold selection against gold triggers of the development set.
pub fn select_threshold(
    dev: &[QuestionCandidates],
    gold: &[GoldTrigger],
    ontology: &EventOntology,
    grid: &[f64],
) -> Result<ThresholdSelection> {
    if dev.is_empty() {
        return Err(Error::arg("development set is empty"));
    }
    select_threshold_by(grid, |t| score(&predictions_at(dev, t), gold, ontology).f1)
}

/// Asks every ontology question of every record and keeps candidates at or
/// above `cfg.selected`.
pub fn decode(
    setup: &QaSetup,
    adapter: &dyn EncoderAdapter,
    records: &[SentenceRecord],
    cfg: &ThresholdConfig,
) -> Result<Vec<TriggerPrediction>> {
    let groups = group_questions(setup.instances(records)?);
    let questions = collect_candidates(adapter, &groups, cfg)?;
    Ok(predictions_at(&questions, cfg.selected))
}
