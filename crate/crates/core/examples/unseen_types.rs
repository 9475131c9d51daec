//! Hold out event types from training and score them separately: the
//! questions for unseen types are only asked at test time.
//!
//! cargo run --release --example unseen_types -- [seed]

use std::collections::BTreeSet;

use eventqa::corpus::{generate_synthetic_corpus, gold_triggers, SyntheticSpec};
use eventqa::decoding::{decode, ThresholdConfig};
use eventqa::encoder::{fine_tune, DevSet, MockConfig, MockEncoder, TrainConfig};
use eventqa::evaluation::{score_types, unseen_split_with, unseen_type_split, ACE_UNSEEN_PRESET};
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{training_examples, NoAnswerPolicy, PackConfig, QaSetup};

fn main() -> eventqa::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);

    let ace = EventOntology::ace2005();
    let preset = unseen_split_with(&[], &[], &ace, &ACE_UNSEEN_PRESET)?;
    println!("ACE preset: {} unseen of {}: {:?}\n", preset.unseen_types.len(), ace.len(), preset.unseen_types);

    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = ace.restrict(&types)?;
    let spec = SyntheticSpec::new(200, &types, 0.0, seed);
    let train = generate_synthetic_corpus(&spec)?;
    let dev = generate_synthetic_corpus(&SyntheticSpec { n_sentences: 60, ..spec.with_seed(seed + 100) })?;
    let test = generate_synthetic_corpus(&SyntheticSpec { n_sentences: 150, ..spec.with_seed(seed + 200) })?;

    let split = unseen_type_split(&train, &test, &ontology, 0.25, seed)?;
    println!("unseen {:?}, seen {:?}", split.unseen_types, split.seen_types);
    let unseen: BTreeSet<String> = split.unseen_types.iter().cloned().collect();
    let dev_seen: Vec<_> = dev.iter().map(|r| r.without_event_types(&unseen)).collect();

    let all: Vec<_> = train.iter().chain(&dev).chain(&test).cloned().collect();
    let full = QaSetup::build(ontology.clone(), MarkerMode::ArgumentRole, QuestionStyle::WithArticle, &all, &all, PackConfig::default())?;
    let seen = QaSetup { ontology: ontology.restrict(&split.seen_types)?, ..full.clone() };

    let untrained = MockEncoder::for_setup(&full, MockConfig { seed, ..MockConfig::default() })?;
    let examples = training_examples(&seen.instances(&split.train)?, NoAnswerPolicy::ClsTarget);
    let cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 20, seed, ..TrainConfig::default() };
    let outcome = fine_tune(untrained.clone(), &examples, &DevSet::new(&seen, &dev_seen)?, &cfg, &ThresholdConfig::default())?;
    let best = outcome.best_epoch.expect("epochs ran");
    let thr = ThresholdConfig { selected: outcome.epochs[best - 1].dev_threshold, ..ThresholdConfig::default() };

    let gold = gold_triggers(&split.test);
    let seen_set: BTreeSet<String> = split.seen_types.iter().cloned().collect();
    for (name, enc) in [("untrained", &untrained), ("trained", &outcome.adapter)] {
        let preds = decode(&full, enc, &split.test, &thr)?;
        let s = score_types(&preds, &gold, &ontology, &seen_set);
        let u = score_types(&preds, &gold, &ontology, &unseen);
        println!("{name:<10} seen F1 {:.3}  unseen F1 {:.3}", s.f1, u.f1);
    }
    Ok(())
}
