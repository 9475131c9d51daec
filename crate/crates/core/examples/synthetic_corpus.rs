//! Generate a seeded synthetic corpus and print a few records.
//!
//! cargo run --example synthetic_corpus -- [n_sentences] [ambiguity_rate] [seed]

use eventqa::corpus::{event_type_counts, generate_synthetic_corpus, validate_record, SyntheticSpec};
use eventqa::ontology::EventOntology;

fn main() -> eventqa::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|s| s.parse().ok()).unwrap_or(20);
    let ambiguity = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let types = ["Attack", "Die", "Marry", "Transport"];
    let ontology = EventOntology::ace2005().restrict(&types)?;
    let corpus = generate_synthetic_corpus(&SyntheticSpec::new(n, &types, ambiguity, seed))?;

    for rec in corpus.iter().take(5) {
        println!("{}  {}", rec.key(), rec.text);
        for ev in &rec.events {
            let args: Vec<String> = ev
                .arguments
                .iter()
                .map(|a| format!("{}={}", a.role, rec.entity(&a.entity_id).map(|e| rec.slice(e.char_start, e.char_end).unwrap_or("")).unwrap_or("?")))
                .collect();
            println!(
                "    {:<10} {:<12} {}",
                ev.event_type,
                rec.slice(ev.trigger_start, ev.trigger_end).unwrap_or(""),
                args.join(" ")
            );
        }
    }
    let invalid = corpus.iter().filter(|r| !validate_record(r, &ontology).is_empty()).count();
    println!("\n{} sentences, {invalid} invalid", corpus.len());
    for (t, c) in event_type_counts(&corpus) {
        println!("  {t:<10} {c}");
    }
    Ok(())
}
