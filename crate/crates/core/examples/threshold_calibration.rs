//! Threshold selection over a small grid, first on hand-written candidates
//! and then on a dev set decoded by an untrained encoder.

use eventqa::corpus::{generate_synthetic_corpus, gold_triggers, GoldTrigger, SyntheticSpec};
use eventqa::decoding::{
    collect_candidates, group_questions, predictions_at, select_threshold, QuestionCandidates, SpanCandidate,
    ThresholdConfig,
};
use eventqa::encoder::{MockConfig, MockEncoder};
use eventqa::markers::MarkerMode;
use eventqa::ontology::{EventOntology, QuestionStyle};
use eventqa::packing::{PackConfig, QaSetup};

fn cand(start: usize, end: usize, text: &str, p: f64) -> SpanCandidate {
    SpanCandidate {
        start_subtoken: 0,
        end_subtoken: 0,
        window_index: 0,
        probability: p,
        char_start: start,
        char_end: end,
        text: text.into(),
    }
}

fn main() -> eventqa::Result<()> {
    // "He was shot and killed." asked for Die: the true answer "killed"
    // competes with a weaker distractor "shot".
    let ontology = EventOntology::ace2005().restrict(&["Die", "Attack"])?;
    let dev = vec![QuestionCandidates {
        doc_id: "d".into(),
        sent_id: "s".into(),
        event_type: "Die".into(),
        candidates: vec![cand(16, 22, "killed", 0.62), cand(7, 11, "shot", 0.27), cand(0, 2, "He", 0.05)],
    }];
    let gold = vec![GoldTrigger {
        doc_id: "d".into(),
        sent_id: "s".into(),
        event_type: "Die".into(),
        start: 16,
        end: 22,
    }];
    let sel = select_threshold(&dev, &gold, &ontology, &ThresholdConfig::default().grid)?;
    for (t, f1) in &sel.grid_f1 {
        let kept: Vec<String> = predictions_at(&dev, *t).into_iter().map(|p| p.text).collect();
        println!("threshold {t:.1}  F1 {f1:.3}  kept {kept:?}");
    }
    println!("selected {} (ties go to the larger threshold)\n", sel.selected);

    // the same procedure on real decoder output
    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = EventOntology::ace2005().restrict(&types)?;
    let records = generate_synthetic_corpus(&SyntheticSpec::new(40, &types, 0.3, 5))?;
    let setup = QaSetup::build(ontology, MarkerMode::None, QuestionStyle::WithArticle, &records, &records, PackConfig::default())?;
    let encoder = MockEncoder::for_setup(&setup, MockConfig::default())?;
    let cfg = ThresholdConfig::default();
    let groups = group_questions(setup.instances(&records)?);
    let cands = collect_candidates(&encoder, &groups, &cfg)?;
    let sel = select_threshold(&cands, &gold_triggers(&records), &setup.ontology, &cfg.grid)?;
    println!("untrained encoder on {} questions:", groups.len());
    for (t, f1) in &sel.grid_f1 {
        println!("threshold {t:.1}  F1 {f1:.3}  predictions {}", predictions_at(&cands, *t).len());
    }
    println!("selected {}", sel.selected);
    Ok(())
}
