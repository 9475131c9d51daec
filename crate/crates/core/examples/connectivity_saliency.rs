//! Gradient connectivity between input tokens and a gold answer's start and
//! end logits, written as JSON and HTML heat maps.
//!
//! cargo run --release --example connectivity_saliency -- [out_dir]

use std::path::PathBuf;

use eventqa::corpus::{generate_synthetic_corpus, SyntheticSpec};
use eventqa::decoding::ThresholdConfig;
use eventqa::encoder::{fine_tune, DevSet, MockConfig, MockEncoder, TrainConfig};
use eventqa::interpret::connectivity;
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{training_examples, NoAnswerPolicy, PackConfig, QaSetup};

fn main() -> eventqa::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "saliency_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| eventqa::Error::Io { path: out.clone(), source: e })?;

    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = EventOntology::ace2005().restrict(&types)?;
    let train = generate_synthetic_corpus(&SyntheticSpec::new(120, &types, 0.0, 11))?;
    let dev = generate_synthetic_corpus(&SyntheticSpec::new(30, &types, 0.0, 12))?;
    let all: Vec<_> = train.iter().chain(&dev).cloned().collect();
    let setup = QaSetup::build(ontology, MarkerMode::ArgumentRole, QuestionStyle::WithArticle, &all, &all, PackConfig::default())?;

    let encoder = MockEncoder::for_setup(&setup, MockConfig::default())?;
    let cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 8, ..TrainConfig::default() };
    let examples = training_examples(&setup.instances(&train)?, NoAnswerPolicy::ClsTarget);
    let trained = fine_tune(encoder, &examples, &DevSet::new(&setup, &dev)?, &cfg, &ThresholdConfig::default())?.adapter;

    let instances = setup.instances(&dev)?;
    let inst = instances.iter().find(|i| !i.gold_answers.is_empty()).expect("an answerable question");
    let (s, e) = inst.gold_answers[0];
    let map = connectivity(&trained, inst, s, e)?;

    println!("{}  answer {:?}", map.question, inst.tokens[s..=e].join(" "));
    for (i, tok) in map.tokens.iter().enumerate() {
        let bar = "#".repeat((map.combined[i] * 30.0).round() as usize);
        println!("{tok:>16} {:.3} {bar}", map.combined[i]);
    }
    map.save(&out.join("saliency.json"), &out.join("saliency.html"))?;
    println!("\nwrote {}/saliency.{{json,html}}", out.display());
    Ok(())
}
