//! Micro and per-type scoring of trigger predictions.

use eventqa::corpus::GoldTrigger;
use eventqa::decoding::TriggerPrediction;
use eventqa::evaluation::score;
use eventqa::ontology::EventOntology;

fn pred(t: &str, s: usize, e: usize, text: &str) -> TriggerPrediction {
    TriggerPrediction {
        doc_id: "d1".into(),
        sent_id: "s1".into(),
        event_type: t.into(),
        char_start: s,
        char_end: e,
        text: text.into(),
        probability: 0.5,
    }
}

fn gold(t: &str, s: usize, e: usize) -> GoldTrigger {
    GoldTrigger {
        doc_id: "d1".into(),
        sent_id: "s1".into(),
        event_type: t.into(),
        start: s,
        end: e,
    }
}

fn main() -> eventqa::Result<()> {
    // "Police have arrested four people in connection with the killings."
    let ontology = EventOntology::ace2005().restrict(&["Die", "Arrest-Jail", "Attack"])?;
    let gold = [gold("Arrest-Jail", 12, 20), gold("Die", 56, 64)];
    let preds = [
        pred("Arrest-Jail", 12, 20, "arrested"), // exact match
        pred("Attack", 56, 64, "killings"),      // right span, wrong type
        pred("Die", 52, 64, "the killings"),     // wrong boundaries
    ];
    let report = score(&preds, &gold, &ontology);
    println!("{}", report.to_table());
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
