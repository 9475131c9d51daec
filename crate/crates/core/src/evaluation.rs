//! Trigger scoring and unseen-event-type splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{GoldTrigger, SentenceRecord};
use crate::decoding::TriggerPrediction;
use crate::error::{Error, Result};
use crate::ontology::EventOntology;

pub use crate::ontology::ACE_UNSEEN_PRESET;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Counts {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // 2tp / (2tp + fp + fn) equals the harmonic mean of P and R but is a
        // single rounding, so equal rationals always give equal floats
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        Counts {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_type: BTreeMap<String, Counts>,
}

impl EvalReport {
    pub fn overall(&self) -> Counts {
        Counts::from_counts(self.tp, self.fp, self.fn_)
    }

    /// Aligned plain-text table, one row per type with any gold or prediction.
    pub fn to_table(&self) -> String {
        let width = self
            .per_type
            .keys()
            .map(|k| k.chars().count())
            .chain([7])
            .max()
            .unwrap_or(7);
        let mut out = String::new();
        let row = |out: &mut String, name: &str, c: &Counts| {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>5}  {:>5}  {:>5}  {:>7.4}  {:>7.4}  {:>7.4}",
                c.tp, c.fp, c.fn_, c.precision, c.recall, c.f1
            );
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>5}  {:>5}  {:>7}  {:>7}  {:>7}",
            "type", "tp", "fp", "fn", "P", "R", "F1"
        );
        for (name, c) in &self.per_type {
            if c.tp + c.fp + c.fn_ > 0 {
                row(&mut out, name, c);
            }
        }
        row(&mut out, "overall", &self.overall());
        out
    }
}

type Key = (String, String, String, usize, usize);

/// Exact-match scoring. Predictions are visited by descending probability
/// and each claims one still-unmatched gold trigger with the same type and
/// offsets; leftovers on either side are false positives and negatives.
pub fn score(predictions: &[TriggerPrediction], gold: &[GoldTrigger], ontology: &EventOntology) -> EvalReport {
    let mut remaining: HashMap<Key, usize> = HashMap::new();
    for g in gold {
        *remaining
            .entry((g.doc_id.clone(), g.sent_id.clone(), g.event_type.clone(), g.start, g.end))
            .or_default() += 1;
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].probability.total_cmp(&predictions[a].probability).then(a.cmp(&b)));

    let mut tallies: BTreeMap<String, (usize, usize, usize)> = ontology
        .subtypes()
        .iter()
        .map(|t| (t.clone(), (0, 0, 0)))
        .collect();
    for g in gold {
        tallies.entry(g.event_type.clone()).or_default().2 += 1;
    }
    for i in order {
        let p = &predictions[i];
        let key = (p.doc_id.clone(), p.sent_id.clone(), p.event_type.clone(), p.char_start, p.char_end);
        let t = tallies.entry(p.event_type.clone()).or_default();
        match remaining.get_mut(&key) {
            Some(n) if *n > 0 => {
                *n -= 1;
                t.0 += 1;
                t.2 -= 1;
            }
            _ => t.1 += 1,
        }
    }
    let (tp, fp, fn_) = tallies
        .values()
        .fold((0, 0, 0), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
    let overall = Counts::from_counts(tp, fp, fn_);
    EvalReport {
        tp,
        fp,
        fn_,
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        per_type: tallies
            .into_iter()
            .map(|(k, (tp, fp, fn_))| (k, Counts::from_counts(tp, fp, fn_)))
            .collect(),
    }
}

/// Scores only the given event types.
pub fn score_types(
    predictions: &[TriggerPrediction],
    gold: &[GoldTrigger],
    ontology: &EventOntology,
    types: &BTreeSet<String>,
) -> EvalReport {
    let preds: Vec<TriggerPrediction> = predictions
        .iter()
        .filter(|p| types.contains(&p.event_type))
        .cloned()
        .collect();
    let gold: Vec<GoldTrigger> = gold.iter().filter(|g| types.contains(&g.event_type)).cloned().collect();
    let keep: Vec<&String> = ontology.subtypes().iter().filter(|t| types.contains(*t)).collect();
    let sub = ontology.restrict(&keep).unwrap_or_else(|_| ontology.clone());
    score(&preds, &gold, &sub)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnseenSplit {
    pub train: Vec<SentenceRecord>,
    pub test: Vec<SentenceRecord>,
    /// Held-out types, in ontology order.
    pub unseen_types: Vec<String>,
    pub seen_types: Vec<String>,
}

/// Holds out `floor(fraction * |types|)` types chosen by `seed`. Training
/// records lose every annotation of those types; test records are untouched.
pub fn unseen_type_split(
    train: &[SentenceRecord],
    test: &[SentenceRecord],
    ontology: &EventOntology,
    fraction: f64,
    seed: u64,
) -> Result<UnseenSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!("unseen fraction {fraction} must lie strictly between 0 and 1")));
    }
    let k = (fraction * ontology.len() as f64).floor() as usize;
    if k == 0 {
        return Err(Error::arg(format!(
            "fraction {fraction} of {} types leaves no unseen type",
            ontology.len()
        )));
    }
    let mut types = ontology.subtypes().to_vec();
    types.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    types.truncate(k);
    unseen_split_with(train, test, ontology, &types)
}

/// Split with a fixed list of unseen types, e.g. [`ACE_UNSEEN_PRESET`].
pub fn unseen_split_with<S: AsRef<str>>(
    train: &[SentenceRecord],
    test: &[SentenceRecord],
    ontology: &EventOntology,
    unseen: &[S],
) -> Result<UnseenSplit> {
    let set: BTreeSet<String> = unseen.iter().map(|s| s.as_ref().to_string()).collect();
    if set.is_empty() {
        return Err(Error::arg("no unseen types given"));
    }
    if let Some(t) = set.iter().find(|t| !ontology.contains(t)) {
        return Err(Error::arg(format!("unseen type `{t}` is not in the ontology")));
    }
    let (unseen_types, seen_types): (Vec<String>, Vec<String>) =
        ontology.subtypes().iter().cloned().partition(|t| set.contains(t));
    Ok(UnseenSplit {
        train: train.iter().map(|r| r.without_event_types(&set)).collect(),
        test: test.to_vec(),
        unseen_types,
        seen_types,
    })
}
