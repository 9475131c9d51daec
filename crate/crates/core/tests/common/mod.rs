#![allow(dead_code)]

use std::collections::BTreeSet;

use eventqa::corpus::{generate_synthetic_corpus, gold_triggers, SentenceRecord, SyntheticSpec};
use eventqa::decoding::{decode, ThresholdConfig};
use eventqa::encoder::{fine_tune, DevSet, MockConfig, MockEncoder, TrainConfig};
use eventqa::evaluation::{score_types, unseen_type_split};
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{training_examples, NoAnswerPolicy, PackConfig, QAInstance, QaSetup};

pub const TYPES: [&str; 4] = ["Attack", "Die", "Marry", "Transport"];

pub fn ontology() -> EventOntology {
    EventOntology::ace2005().restrict(&TYPES).unwrap()
}

pub fn corpus(n: usize, ambiguity: f64, seed: u64) -> Vec<SentenceRecord> {
    generate_synthetic_corpus(&SyntheticSpec::new(n, &TYPES, ambiguity, seed)).unwrap()
}

pub fn setup_over(records: &[SentenceRecord], mode: MarkerMode) -> QaSetup {
    QaSetup::build(ontology(), mode, QuestionStyle::WithArticle, records, records, PackConfig::default()).unwrap()
}

/// Packed argument-role instances over a small seeded corpus.
pub fn marked_instances(seed: u64, n: usize) -> (QaSetup, Vec<QAInstance>) {
    let recs = corpus(n, 0.3, seed);
    let setup = setup_over(&recs, MarkerMode::ArgumentRole);
    let inst = setup.instances(&recs).unwrap();
    (setup, inst)
}

pub struct Splits {
    pub train: Vec<SentenceRecord>,
    pub dev: Vec<SentenceRecord>,
    pub test: Vec<SentenceRecord>,
}

pub fn splits(n_train: usize, n_dev: usize, n_test: usize, ambiguity: f64, seed: u64) -> Splits {
    let base = SyntheticSpec::new(n_train, &TYPES, ambiguity, seed);
    let gen = |n: usize, s: u64| generate_synthetic_corpus(&SyntheticSpec { n_sentences: n, ..base.with_seed(s) }).unwrap();
    Splits {
        train: gen(n_train, seed),
        dev: gen(n_dev, seed.wrapping_add(1000)),
        test: gen(n_test, seed.wrapping_add(2000)),
    }
}

pub struct Experiment {
    pub setup: QaSetup,
    pub trained: MockEncoder,
    pub untrained: MockEncoder,
    pub threshold: ThresholdConfig,
    pub epochs_run: usize,
    pub best_dev_f1: f64,
}

/// Trains a fresh mock on `train` (minus `unseen` annotations, asking only
/// seen questions) and keeps the best-dev epoch and its threshold.
pub fn train_experiment(
    data: &Splits,
    mode: MarkerMode,
    seed: u64,
    epochs: usize,
    unseen: &BTreeSet<String>,
) -> Experiment {
    let all: Vec<SentenceRecord> = data.train.iter().chain(&data.dev).chain(&data.test).cloned().collect();
    let setup = setup_over(&all, mode);
    let seen_types: Vec<String> = setup.ontology.subtypes().iter().filter(|t| !unseen.contains(*t)).cloned().collect();
    let seen = QaSetup {
        ontology: setup.ontology.restrict(&seen_types).unwrap(),
        ..setup.clone()
    };
    let strip = |r: &[SentenceRecord]| -> Vec<SentenceRecord> { r.iter().map(|x| x.without_event_types(unseen)).collect() };
    let untrained = MockEncoder::for_setup(&setup, MockConfig { seed, ..MockConfig::default() }).unwrap();
    let examples = training_examples(&seen.instances(&strip(&data.train)).unwrap(), NoAnswerPolicy::ClsTarget);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: epochs,
        seed,
        ..TrainConfig::default()
    };
    let dev = DevSet::new(&seen, &strip(&data.dev)).unwrap();
    let out = fine_tune(untrained.clone(), &examples, &dev, &cfg, &ThresholdConfig::default()).unwrap();
    let best = out.best_epoch.unwrap();
    let m = &out.epochs[best - 1];
    Experiment {
        threshold: ThresholdConfig {
            selected: m.dev_threshold,
            ..ThresholdConfig::default()
        },
        best_dev_f1: m.dev_f1,
        epochs_run: out.epochs.len(),
        setup,
        trained: out.adapter,
        untrained,
    }
}

impl Experiment {
    /// Test F1 restricted to `types`, for the trained or untrained encoder.
    pub fn test_f1(&self, test: &[SentenceRecord], types: &BTreeSet<String>, trained: bool) -> f64 {
        let enc = if trained { &self.trained } else { &self.untrained };
        let preds = decode(&self.setup, enc, test, &self.threshold).unwrap();
        score_types(&preds, &gold_triggers(test), &self.setup.ontology, types).f1
    }
}

pub fn all_types() -> BTreeSet<String> {
    TYPES.iter().map(|s| s.to_string()).collect()
}

pub fn held_out(seed: u64) -> BTreeSet<String> {
    let split = unseen_type_split(&[], &[], &ontology(), 0.25, seed).unwrap();
    split.unseen_types.into_iter().collect()
}
