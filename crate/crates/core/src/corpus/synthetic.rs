//! Seeded synthetic corpora for desk-scale experiments.
//!
//! Every event type owns a small trigger lexicon: its lower-cased name plus a
//! few pseudo-words. Ambiguous sentences instead use a lexeme shared by a pair
//! of types; the surrounding words are drawn from the same distribution for
//! both senses, so only the argument roles (and, weakly, the argument entity
//! types) tell the senses apart.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Argument, EntityMention, EventMention, RoleRef, SentenceBuilder, SentenceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_sentences: usize,
    pub event_types: Vec<String>,
    pub ambiguity_rate: f64,
    pub seed: u64,
    /// Fraction of sentences carrying a second event.
    #[serde(default = "defaults::multi_event_rate")]
    pub multi_event_rate: f64,
    /// Fraction of sentences with no event at all.
    #[serde(default = "defaults::empty_rate")]
    pub empty_rate: f64,
    /// How strongly the argument's entity type follows the event type
    /// (0 = independent, 1 = deterministic).
    #[serde(default = "defaults::entity_type_cue")]
    pub entity_type_cue: f64,
    #[serde(default = "defaults::sentences_per_doc")]
    pub sentences_per_doc: usize,
}

mod defaults {
    pub fn multi_event_rate() -> f64 {
        0.25
    }
    pub fn empty_rate() -> f64 {
        0.1
    }
    pub fn entity_type_cue() -> f64 {
        0.8
    }
    pub fn sentences_per_doc() -> usize {
        10
    }
}

impl SyntheticSpec {
    pub fn new<S: AsRef<str>>(
        n_sentences: usize,
        event_types: &[S],
        ambiguity_rate: f64,
        seed: u64,
    ) -> Self {
        SyntheticSpec {
            n_sentences,
            event_types: event_types.iter().map(|s| s.as_ref().to_string()).collect(),
            ambiguity_rate,
            seed,
            multi_event_rate: defaults::multi_event_rate(),
            empty_rate: defaults::empty_rate(),
            entity_type_cue: defaults::entity_type_cue(),
            sentences_per_doc: defaults::sentences_per_doc(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticSpec {
            seed,
            ..self.clone()
        }
    }
}

const PLACE_ROLE: &str = "Place";

const ROLE_POOL: [&str; 16] = [
    "Agent",
    "Victim",
    "Attacker",
    "Target",
    "Person",
    "Defendant",
    "Entity",
    "Buyer",
    "Giver",
    "Recipient",
    "Artifact",
    "Plaintiff",
    "Adjudicator",
    "Instrument",
    "Beneficiary",
    "Prosecutor",
];

/// Names that do not reveal their entity type; the type is assigned per mention.
const PARTY_NAMES: [&str; 12] = [
    "the delegation",
    "the team",
    "the unit",
    "the party",
    "the board",
    "the crew",
    "the committee",
    "the staff",
    "the group",
    "the agency",
    "the council",
    "the network",
];

const PLACE_NAMES: [&str; 8] = [
    "baghdad",
    "paris",
    "the city",
    "texas",
    "the capital",
    "new windsor",
    "london",
    "the region",
];

const OBJ_FILLERS: [&str; 7] = [
    "earlier",
    "on monday",
    "last week",
    "again",
    "after the talks",
    "without warning",
    "late at night",
];

const PREFIXES: [&str; 4] = ["on tuesday", "according to reports", "meanwhile", "earlier today"];

const SUBJ_FILLERS: [&str; 4] = ["reports described", "witnesses saw", "sources confirmed", "observers noted"];

const EMPTY_TAILS: [&str; 4] = [
    "reported nothing new",
    "declined to comment",
    "held a routine meeting",
    "released a short statement",
];

const ONSETS: [&str; 14] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn pseudo_word(key: &str) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(key));
    let mut w = String::new();
    for _ in 0..3 {
        w.push_str(ONSETS.choose(&mut rng).unwrap());
        w.push_str(VOWELS.choose(&mut rng).unwrap());
    }
    w.push_str(["n", "r", "s", "t"].choose(&mut rng).unwrap());
    w
}

/// Trigger and role inventory implied by a list of event types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLexicon {
    /// event type -> trigger lexemes used only by that type.
    pub triggers: BTreeMap<String, Vec<String>>,
    /// event type -> role of its mandatory argument.
    pub roles: BTreeMap<String, String>,
    /// event type -> entity type its argument prefers.
    pub preferred_entity_type: BTreeMap<String, String>,
    /// (type, type, shared lexeme) for ambiguous sentences.
    pub ambiguous_pairs: Vec<(String, String, String)>,
}

impl SyntheticLexicon {
    pub fn for_types(event_types: &[String]) -> Self {
        let mut sorted: Vec<String> = event_types.to_vec();
        sorted.sort();
        sorted.dedup();

        let mut triggers = BTreeMap::new();
        for t in &sorted {
            let mut lex = vec![t.to_lowercase()];
            for k in 0..2 {
                lex.push(pseudo_word(&format!("trigger/{t}/{k}")));
            }
            triggers.insert(t.clone(), lex);
        }

        let mut roles = BTreeMap::new();
        let mut preferred_entity_type = BTreeMap::new();
        for (i, t) in sorted.iter().enumerate() {
            roles.insert(t.clone(), ROLE_POOL[i % ROLE_POOL.len()].to_string());
            let et = if i % 2 == 0 { "PER" } else { "ORG" };
            preferred_entity_type.insert(t.clone(), et.to_string());
        }

        let mut ambiguous_pairs = Vec::new();
        match sorted.len() {
            0 | 1 => {}
            2 => ambiguous_pairs.push((
                sorted[0].clone(),
                sorted[1].clone(),
                pseudo_word(&format!("shared/{}/{}", sorted[0], sorted[1])),
            )),
            n => {
                for i in 0..n {
                    let a = &sorted[i];
                    let b = &sorted[(i + 1) % n];
                    ambiguous_pairs.push((
                        a.clone(),
                        b.clone(),
                        pseudo_word(&format!("shared/{a}/{b}")),
                    ));
                }
            }
        }

        SyntheticLexicon {
            triggers,
            roles,
            preferred_entity_type,
            ambiguous_pairs,
        }
    }
}

struct Draft {
    builder: SentenceBuilder,
    entities: Vec<EntityMention>,
    events: Vec<EventMention>,
}

impl Draft {
    fn new() -> Self {
        Draft {
            builder: SentenceBuilder::new(),
            entities: Vec::new(),
            events: Vec::new(),
        }
    }

    fn entity(&mut self, name: &str, entity_type: &str) -> String {
        let (s, e) = self.builder.push_words(name);
        let id = format!("e{}", self.entities.len() + 1);
        self.entities.push(EntityMention {
            id: id.clone(),
            char_start: s,
            char_end: e,
            entity_type: entity_type.to_string(),
            roles: Vec::new(),
        });
        id
    }

    fn add_argument(&mut self, event_idx: usize, entity_id: &str, role: &str) {
        let ev = &mut self.events[event_idx];
        ev.arguments.push(Argument {
            entity_id: entity_id.to_string(),
            role: role.to_string(),
        });
        let ev_id = ev.id.clone();
        let ent = self
            .entities
            .iter_mut()
            .find(|e| e.id == entity_id)
            .expect("entity exists");
        ent.roles.push(RoleRef {
            event_id: ev_id,
            role: role.to_string(),
        });
    }
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    lex: SyntheticLexicon,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn pick<'s>(&mut self, pool: &'s [&'s str]) -> &'s str {
        pool.choose(&mut self.rng).copied().unwrap()
    }

    fn argument_entity_type(&mut self, event_type: &str) -> String {
        let cue = self.spec.entity_type_cue;
        if self.rng.random_bool(cue.clamp(0.0, 1.0)) {
            self.lex.preferred_entity_type[event_type].clone()
        } else if self.rng.random_bool(0.5) {
            "PER".to_string()
        } else {
            "ORG".to_string()
        }
    }

    /// Writes one event clause; returns the index of the new event and the
    /// id of its mandatory argument.
    fn clause(&mut self, d: &mut Draft, event_type: &str, lexeme: &str) -> (usize, String) {
        let ev_idx = d.events.len();
        let ev_id = format!("ev{}", ev_idx + 1);
        let role = self.lex.roles[event_type].clone();
        let arg_type = self.argument_entity_type(event_type);
        let arg_name = self.pick(&PARTY_NAMES);
        let pattern = self.rng.random_range(0..4);

        let push_trigger = |d: &mut Draft| {
            let (s, e) = d.builder.push(lexeme);
            d.events.push(EventMention {
                id: ev_id.clone(),
                event_type: event_type.to_string(),
                trigger_start: s,
                trigger_end: e,
                arguments: Vec::new(),
            });
        };

        let arg_id = match pattern {
            0 => {
                let id = d.entity(arg_name, &arg_type);
                push_trigger(d);
                if self.rng.random_bool(0.5) {
                    let f = self.pick(&OBJ_FILLERS);
                    d.builder.push_words(f);
                }
                id
            }
            1 => {
                let f = self.pick(&SUBJ_FILLERS);
                d.builder.push_words(f);
                push_trigger(d);
                d.builder.push_words("by");
                d.entity(arg_name, &arg_type)
            }
            2 => {
                d.builder.push_words("the");
                push_trigger(d);
                d.builder.push_words("of");
                d.entity(arg_name, &arg_type)
            }
            _ => {
                let id = d.entity(arg_name, &arg_type);
                d.builder.push_words("was involved in the");
                push_trigger(d);
                id
            }
        };
        d.add_argument(ev_idx, &arg_id, &role);

        if self.rng.random_bool(0.5) {
            d.builder.push_words("in");
            let place = self.pick(&PLACE_NAMES);
            let pid = d.entity(place, "GPE");
            d.add_argument(ev_idx, &pid, PLACE_ROLE);
        }
        (ev_idx, arg_id)
    }

    fn unambiguous_lexeme(&mut self, event_type: &str) -> String {
        self.lex.triggers[event_type]
            .choose(&mut self.rng)
            .unwrap()
            .clone()
    }

    fn sentence(&mut self, index: usize, ambiguous: Option<(String, String)>) -> SentenceRecord {
        let mut d = Draft::new();
        let types = self.spec.event_types.clone();

        if self.rng.random_bool(0.3) {
            let p = self.pick(&PREFIXES);
            d.builder.push_words(p);
            d.builder.glue(",");
        }

        let is_empty = ambiguous.is_none() && self.rng.random_bool(self.spec.empty_rate);
        if is_empty {
            let name = self.pick(&PARTY_NAMES);
            let et = if self.rng.random_bool(0.5) { "PER" } else { "ORG" };
            d.entity(name, et);
            let tail = self.pick(&EMPTY_TAILS);
            d.builder.push_words(tail);
        } else {
            let (first_type, first_lexeme) = match ambiguous {
                Some((t, lexeme)) => (t, lexeme),
                None => {
                    let t = types.choose(&mut self.rng).unwrap().clone();
                    let lexeme = self.unambiguous_lexeme(&t);
                    (t, lexeme)
                }
            };
            let (_, first_arg) = self.clause(&mut d, &first_type, &first_lexeme);

            if self.rng.random_bool(self.spec.multi_event_rate) {
                let joiner = self.pick(&["and", "while"]);
                d.builder.push_words(joiner);
                let second_type = if self.rng.random_bool(0.5) {
                    first_type.clone()
                } else {
                    types.choose(&mut self.rng).unwrap().clone()
                };
                let lexeme = self.unambiguous_lexeme(&second_type);
                let (ev2, _) = self.clause(&mut d, &second_type, &lexeme);
                if second_type != first_type && self.rng.random_bool(0.3) {
                    let role = self.lex.roles[&second_type].clone();
                    d.add_argument(ev2, &first_arg, &role);
                }
            }
        }

        if self.rng.random_bool(0.4) {
            d.builder.glue(",");
            d.builder.push_words("officials from");
            let name = self.pick(&PARTY_NAMES);
            let et = if self.rng.random_bool(0.5) { "PER" } else { "ORG" };
            d.entity(name, et);
            d.builder.push_words("said");
        }
        d.builder.glue(".");

        let per_doc = self.spec.sentences_per_doc.max(1);
        let doc_id = format!("syn{}-d{:03}", self.spec.seed, index / per_doc);
        let sent_id = format!("s{:02}", index % per_doc);
        let mut rec = d.builder.finish(&doc_id, &sent_id);
        rec.entities = d.entities;
        rec.events = d.events;
        capitalize_first(&mut rec);
        rec
    }
}

fn capitalize_first(rec: &mut SentenceRecord) {
    let mut chars = rec.text.chars();
    if let Some(c) = chars.next() {
        let up: String = c.to_uppercase().collect();
        if up.chars().count() == 1 {
            rec.text = up.clone() + chars.as_str();
            if let Some(tok) = rec.tokens.first_mut() {
                let mut tc = tok.text.chars();
                tc.next();
                tok.text = up + tc.as_str();
            }
        }
    }
}

/// Generates `spec.n_sentences` valid records; a pure function of `spec`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Vec<SentenceRecord>> {
    if spec.n_sentences == 0 {
        return Err(Error::arg("n_sentences must be positive"));
    }
    if spec.event_types.is_empty() {
        return Err(Error::arg("at least one event type is required"));
    }
    for (name, v) in [
        ("ambiguity_rate", spec.ambiguity_rate),
        ("multi_event_rate", spec.multi_event_rate),
        ("empty_rate", spec.empty_rate),
        ("entity_type_cue", spec.entity_type_cue),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::arg(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let lex = SyntheticLexicon::for_types(&spec.event_types);
    if spec.ambiguity_rate > 0.0 && lex.ambiguous_pairs.is_empty() {
        return Err(Error::arg("ambiguity requires at least two event types"));
    }

    let mut gen = Generator {
        spec,
        lex,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };

    let n = spec.n_sentences;
    let n_ambiguous = ((spec.ambiguity_rate * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut gen.rng);
    let mut assignment: Vec<Option<(String, String)>> = vec![None; n];
    let n_pairs = gen.lex.ambiguous_pairs.len();
    for (j, &slot) in order.iter().take(n_ambiguous).enumerate() {
        // consecutive ambiguous sentences alternate between the two senses of
        // a pair so both senses of every used lexeme occur
        let pair_idx = if j + 1 == n_ambiguous && n_ambiguous % 2 == 1 && j > 0 {
            0
        } else {
            (j / 2) % n_pairs
        };
        let (a, b, lexeme) = gen.lex.ambiguous_pairs[pair_idx].clone();
        let sense = if j % 2 == 0 { a } else { b };
        assignment[slot] = Some((sense, lexeme));
    }

    Ok(assignment
        .into_iter()
        .enumerate()
        .map(|(i, amb)| gen.sentence(i, amb))
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::corpus::validate_record;
    use crate::ontology::EventOntology;

    fn lexeme_types(records: &[SentenceRecord]) -> BTreeMap<String, BTreeSet<String>> {
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for r in records {
            for ev in &r.events {
                let lex = r.slice(ev.trigger_start, ev.trigger_end).unwrap().to_lowercase();
                map.entry(lex).or_default().insert(ev.event_type.clone());
            }
        }
        map
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SyntheticSpec::new(200, &["A", "B", "C"], 0.3, 7);
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        let ja: Vec<String> = a.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        let jb: Vec<String> = b.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
        assert_eq!(ja, jb);
        let c = generate_synthetic_corpus(&spec.with_seed(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn records_are_valid() {
        let spec = SyntheticSpec::new(300, &["A", "B", "C", "D"], 0.5, 3);
        let onto = EventOntology::from_subtypes(&spec.event_types).unwrap();
        for r in generate_synthetic_corpus(&spec).unwrap() {
            let v = validate_record(&r, &onto);
            assert!(v.is_empty(), "{}: {:?}", r.key(), v);
            for ev in &r.events {
                assert!(!ev.arguments.is_empty());
            }
        }
    }

    #[test]
    fn no_ambiguity_means_one_type_per_lexeme() {
        let spec = SyntheticSpec::new(300, &["A", "B", "C"], 0.0, 11);
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        for (lex, types) in lexeme_types(&corpus) {
            assert_eq!(types.len(), 1, "lexeme {lex} used by {types:?}");
        }
    }

    #[test]
    fn full_ambiguity_shares_lexeme_in_every_sentence() {
        let spec = SyntheticSpec::new(50, &["A", "B"], 1.0, 1);
        let corpus = generate_synthetic_corpus(&spec).unwrap();
        let lt = lexeme_types(&corpus);
        let shared: BTreeSet<&String> = lt
            .iter()
            .filter(|(_, t)| t.len() >= 2)
            .map(|(l, _)| l)
            .collect();
        assert!(!shared.is_empty());
        for r in &corpus {
            let has = r.events.iter().any(|ev| {
                shared.contains(&r.slice(ev.trigger_start, ev.trigger_end).unwrap().to_lowercase())
            });
            assert!(has, "{} lacks an ambiguous trigger", r.text);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate_synthetic_corpus(&SyntheticSpec::new(0, &["A"], 0.0, 1)).is_err());
        assert!(generate_synthetic_corpus(&SyntheticSpec::new(5, &["A"], 0.5, 1)).is_err());
        assert!(generate_synthetic_corpus(&SyntheticSpec::new(5, &["A", "B"], 1.5, 1)).is_err());
    }
}
