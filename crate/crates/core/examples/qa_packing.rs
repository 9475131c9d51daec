//! Pack (question, context) pairs, including a sentence long enough to need
//! several sliding windows.

use eventqa::corpus::{generate_synthetic_corpus, SyntheticSpec};
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{PackConfig, QaSetup};

fn main() -> eventqa::Result<()> {
    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = EventOntology::ace2005().restrict(&types)?;
    let corpus = generate_synthetic_corpus(&SyntheticSpec::new(30, &types, 0.0, 3))?;
    let setup = QaSetup::build(
        ontology,
        MarkerMode::ArgumentRole,
        QuestionStyle::WithArticle,
        &corpus,
        &corpus,
        PackConfig::default(),
    )?;

    let rec = corpus.iter().find(|r| !r.events.is_empty()).expect("an event sentence");
    let prepared = setup.prepare(rec)?;
    println!("{}\n{}\n", rec.text, prepared.aug.text);
    for inst in &prepared.instances {
        let answers: Vec<String> = inst
            .gold_answers
            .iter()
            .map(|&(s, e)| inst.tokens[s..=e].join(" "))
            .collect();
        println!("{:<28} {} positions, answers {:?}", inst.question, inst.len(), answers);
    }
    let first = &prepared.instances[0];
    println!("\ntokens:   {}", first.tokens.join(" "));
    println!("segments: {:?}", first.segment_ids);

    // a long context split across windows
    let small = QaSetup {
        pack: PackConfig { max_seq_len: 24, doc_stride: 8 },
        ..setup.clone()
    };
    let windows = small.prepare_for(rec, &[rec.events[0].event_type.clone()])?.instances;
    println!("\nmax_seq_len 24 / stride 8:");
    for w in &windows {
        println!("  window {} covers context subtokens {:?}, answers {:?}", w.window_index, w.context_window, w.gold_answers);
    }
    Ok(())
}
