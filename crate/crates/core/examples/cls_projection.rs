//! Project [CLS] vectors of trained-model sentences to two dimensions and
//! export CSV and SVG scatter plots.
//!
//! cargo run --release --example cls_projection -- [out_dir]

use std::path::PathBuf;

use eventqa::corpus::{generate_synthetic_corpus, SyntheticSpec};
use eventqa::decoding::ThresholdConfig;
use eventqa::encoder::{fine_tune, DevSet, MockConfig, MockEncoder, TrainConfig};
use eventqa::interpret::{cls_projection, projection_svg, write_projection_csv};
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{training_examples, NoAnswerPolicy, PackConfig, QaSetup};

fn main() -> eventqa::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "projection_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| eventqa::Error::Io { path: out.clone(), source: e })?;

    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = EventOntology::ace2005().restrict(&types)?;
    let train = generate_synthetic_corpus(&SyntheticSpec::new(120, &types, 0.0, 21))?;
    let dev = generate_synthetic_corpus(&SyntheticSpec::new(40, &types, 0.0, 22))?;
    let all: Vec<_> = train.iter().chain(&dev).cloned().collect();
    let setup = QaSetup::build(ontology, MarkerMode::ArgumentRole, QuestionStyle::WithArticle, &all, &all, PackConfig::default())?;

    let encoder = MockEncoder::for_setup(&setup, MockConfig::default())?;
    let cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 8, ..TrainConfig::default() };
    let examples = training_examples(&setup.instances(&train)?, NoAnswerPolicy::ClsTarget);
    let trained = fine_tune(encoder, &examples, &DevSet::new(&setup, &dev)?, &cfg, &ThresholdConfig::default())?.adapter;

    let points = cls_projection(&trained, &setup, &dev, 0)?;
    for p in points.iter().take(8) {
        println!("{}/{}  {:<10} ({:+.3}, {:+.3})", p.doc_id, p.sent_id, p.label, p.x, p.y);
    }
    write_projection_csv(&out.join("projection.csv"), &points)?;
    let svg = out.join("projection.svg");
    std::fs::write(&svg, projection_svg(&points)).map_err(|e| eventqa::Error::Io { path: svg.clone(), source: e })?;
    println!("{} points -> {}/projection.{{csv,svg}}", points.len(), out.display());
    Ok(())
}
