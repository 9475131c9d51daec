//! Fine-tune the mock encoder on a synthetic corpus and decode a few test
//! sentences.
//!
//! cargo run --release --example train_mock -- [epochs] [marker_mode]

use eventqa::corpus::{generate_synthetic_corpus, SyntheticSpec};
use eventqa::decoding::{decode, ThresholdConfig};
use eventqa::encoder::{fine_tune, DevSet, MockConfig, MockEncoder, TrainConfig};
use eventqa::evaluation::score;
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{training_examples, NoAnswerPolicy, PackConfig, QaSetup};

fn main() -> eventqa::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().and_then(|s| s.parse().ok()).unwrap_or(15);
    let mode: MarkerMode = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(MarkerMode::ArgumentRole);

    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = EventOntology::ace2005().restrict(&types)?;
    let spec = SyntheticSpec::new(200, &types, 0.0, 1);
    let train = generate_synthetic_corpus(&spec)?;
    let dev = generate_synthetic_corpus(&SyntheticSpec { n_sentences: 60, ..spec.with_seed(2) })?;
    let test = generate_synthetic_corpus(&SyntheticSpec { n_sentences: 100, ..spec.with_seed(3) })?;

    let all: Vec<_> = train.iter().chain(&dev).chain(&test).cloned().collect();
    let setup = QaSetup::build(ontology, mode, QuestionStyle::WithArticle, &all, &all, PackConfig::default())?;
    let encoder = MockEncoder::for_setup(&setup, MockConfig { seed: 1, ..MockConfig::default() })?;

    let examples = training_examples(&setup.instances(&train)?, NoAnswerPolicy::ClsTarget);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: epochs,
        seed: 1,
        ..TrainConfig::default()
    };
    let thresholds = ThresholdConfig::default();
    let outcome = fine_tune(encoder, &examples, &DevSet::new(&setup, &dev)?, &cfg, &thresholds)?;
    for m in &outcome.epochs {
        println!("epoch {:>2}  loss {:.4}  dev F1 {:.4} @ {}", m.epoch, m.train_loss, m.dev_f1, m.dev_threshold);
    }
    let best = outcome.best_epoch.expect("at least one epoch");
    let threshold = outcome.epochs[best - 1].dev_threshold;
    println!("kept epoch {best}, threshold {threshold}");

    let cfg = ThresholdConfig { selected: threshold, ..thresholds };
    let preds = decode(&setup, &outcome.adapter, &test, &cfg)?;
    for rec in test.iter().take(4) {
        println!("\n{}", rec.text);
        for p in preds.iter().filter(|p| p.doc_id == rec.doc_id && p.sent_id == rec.sent_id) {
            println!("  {:<10} {:<12} {:.3}", p.event_type, p.text, p.probability);
        }
    }
    println!("\n{}", score(&preds, &eventqa::corpus::gold_triggers(&test), &setup.ontology).to_table());
    Ok(())
}
