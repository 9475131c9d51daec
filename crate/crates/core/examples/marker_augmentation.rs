//! Augment one sentence with each marker mode and map a span both ways.

use std::path::Path;

use eventqa::corpus::load_corpus;
use eventqa::markers::{augment, marker_inventory, Direction, MarkerMode};
use eventqa::ontology::EventOntology;

fn main() -> eventqa::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/police.jsonl");
    let records = load_corpus(Path::new(path), &EventOntology::ace2005())?;
    let rec = &records[0];

    for mode in MarkerMode::ALL {
        let aug = augment(rec, mode)?;
        println!("{mode:<16} {}", aug.text);
    }

    let aug = augment(rec, MarkerMode::ArgumentRole)?;
    let die = rec.events.iter().find(|e| e.event_type == "Die").expect("Die event");
    let (s, e) = aug.remap_span(die.trigger_start, die.trigger_end, Direction::ToAugmented)?;
    println!("\ntrigger {:?} at {}..{} -> {}..{} {:?}", rec.slice(die.trigger_start, die.trigger_end).unwrap_or(""), die.trigger_start, die.trigger_end, s, e, aug.slice(s, e).unwrap_or(""));
    let back = aug.remap_span(s, e, Direction::ToOriginal)?;
    println!("back to original: {back:?}");
    assert_eq!(aug.strip(), rec.text);

    println!("\nmarker inventory: {:?}", marker_inventory(&records, MarkerMode::ArgumentRole));
    Ok(())
}
