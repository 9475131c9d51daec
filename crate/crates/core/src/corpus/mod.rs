//! Sentence-level data model, JSONL corpus I/O and record validation.
//!
//! All offsets are character offsets (Unicode scalar values) into the
//! sentence text, end-exclusive. Token indices are derived from them.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::EventOntology;

pub use synthetic::{generate_synthetic_corpus, SyntheticLexicon, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    #[serde(rename = "start")]
    pub char_start: usize,
    #[serde(rename = "end")]
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoleRef {
    pub event_id: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub id: String,
    #[serde(rename = "start")]
    pub char_start: usize,
    #[serde(rename = "end")]
    pub char_end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
    #[serde(default)]
    pub roles: Vec<RoleRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub entity_id: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub id: String,
    #[serde(rename = "type")]
    pub event_type: String,
    pub trigger_start: usize,
    pub trigger_end: usize,
    #[serde(default)]
    pub arguments: Vec<Argument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub doc_id: String,
    pub sent_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub entities: Vec<EntityMention>,
    #[serde(default)]
    pub events: Vec<EventMention>,
}

/// A gold trigger in original sentence coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GoldTrigger {
    pub doc_id: String,
    pub sent_id: String,
    pub event_type: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    TokenOffsets,
    TokenOrder,
    EntityOffsets,
    TriggerOffsets,
    DuplicateId,
    UnknownEventType,
    DanglingReference,
    RoleMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Number of characters in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slices `text` by character offsets; `None` when out of range.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b_start..b_end])
}

impl SentenceRecord {
    pub fn key(&self) -> String {
        format!("{}/{}", self.doc_id, self.sent_id)
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        char_slice(&self.text, start, end)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityMention> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn event(&self, id: &str) -> Option<&EventMention> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn gold_triggers(&self) -> Vec<GoldTrigger> {
        self.events
            .iter()
            .map(|ev| GoldTrigger {
                doc_id: self.doc_id.clone(),
                sent_id: self.sent_id.clone(),
                event_type: ev.event_type.clone(),
                start: ev.trigger_start,
                end: ev.trigger_end,
            })
            .collect()
    }

    /// Roles an entity plays, taken from event argument lists.
    pub fn roles_of(&self, entity_id: &str) -> Vec<RoleRef> {
        let mut roles: Vec<RoleRef> = self
            .events
            .iter()
            .flat_map(|ev| {
                ev.arguments
                    .iter()
                    .filter(move |a| a.entity_id == entity_id)
                    .map(move |a| RoleRef {
                        event_id: ev.id.clone(),
                        role: a.role.clone(),
                    })
            })
            .collect();
        roles.sort();
        roles.dedup();
        roles
    }

    /// Drops every event whose type is in `types` along with the roles and
    /// arguments that reference it. The sentence itself is kept.
    pub fn without_event_types(&self, types: &BTreeSet<String>) -> SentenceRecord {
        let removed: BTreeSet<&str> = self
            .events
            .iter()
            .filter(|e| types.contains(&e.event_type))
            .map(|e| e.id.as_str())
            .collect();
        let mut out = self.clone();
        out.events.retain(|e| !removed.contains(e.id.as_str()));
        for ent in &mut out.entities {
            ent.roles.retain(|r| !removed.contains(r.event_id.as_str()));
        }
        out
    }
}

pub fn gold_triggers(records: &[SentenceRecord]) -> Vec<GoldTrigger> {
    records.iter().flat_map(|r| r.gold_triggers()).collect()
}

pub fn validate_record(record: &SentenceRecord, ontology: &EventOntology) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, field: String, message: String| {
        out.push(Violation {
            kind,
            field,
            message,
        })
    };
    let n_chars = char_len(&record.text);

    let mut prev_end = 0usize;
    for (i, tok) in record.tokens.iter().enumerate() {
        let field = format!("tokens[{i}]");
        if tok.char_start >= tok.char_end || tok.char_end > n_chars {
            push(
                ViolationKind::TokenOffsets,
                field,
                format!("offsets {}..{} invalid", tok.char_start, tok.char_end),
            );
            continue;
        }
        if record.slice(tok.char_start, tok.char_end) != Some(tok.text.as_str()) {
            push(
                ViolationKind::TokenOffsets,
                field.clone(),
                format!("text `{}` does not match sentence slice", tok.text),
            );
        }
        if i > 0 && tok.char_start < prev_end {
            push(
                ViolationKind::TokenOrder,
                field,
                "tokens overlap or are out of order".into(),
            );
        }
        prev_end = tok.char_end;
    }

    let starts: BTreeSet<usize> = record.tokens.iter().map(|t| t.char_start).collect();
    let ends: BTreeSet<usize> = record.tokens.iter().map(|t| t.char_end).collect();
    let aligned = |s: usize, e: usize| s < e && e <= n_chars && starts.contains(&s) && ends.contains(&e);

    let mut entity_ids = BTreeSet::new();
    for (i, ent) in record.entities.iter().enumerate() {
        if !entity_ids.insert(ent.id.as_str()) {
            push(
                ViolationKind::DuplicateId,
                format!("entities[{i}].id"),
                format!("duplicate entity id `{}`", ent.id),
            );
        }
        if !aligned(ent.char_start, ent.char_end) {
            push(
                ViolationKind::EntityOffsets,
                format!("entities[{i}]"),
                format!(
                    "entity `{}` offsets {}..{} do not align to token boundaries",
                    ent.id, ent.char_start, ent.char_end
                ),
            );
        }
    }

    let mut event_ids = BTreeSet::new();
    for (i, ev) in record.events.iter().enumerate() {
        if !event_ids.insert(ev.id.as_str()) {
            push(
                ViolationKind::DuplicateId,
                format!("events[{i}].id"),
                format!("duplicate event id `{}`", ev.id),
            );
        }
        if !aligned(ev.trigger_start, ev.trigger_end) {
            push(
                ViolationKind::TriggerOffsets,
                format!("events[{i}].trigger"),
                format!(
                    "trigger of `{}` at {}..{} does not align to token boundaries",
                    ev.id, ev.trigger_start, ev.trigger_end
                ),
            );
        }
        if !ontology.contains(&ev.event_type) {
            push(
                ViolationKind::UnknownEventType,
                format!("events[{i}].type"),
                format!("unknown event type `{}`", ev.event_type),
            );
        }
        for (j, arg) in ev.arguments.iter().enumerate() {
            if record.entity(&arg.entity_id).is_none() {
                push(
                    ViolationKind::DanglingReference,
                    format!("events[{i}].arguments[{j}]"),
                    format!("argument references missing entity `{}`", arg.entity_id),
                );
            }
        }
    }

    for (i, ent) in record.entities.iter().enumerate() {
        for (j, role) in ent.roles.iter().enumerate() {
            match record.event(&role.event_id) {
                None => push(
                    ViolationKind::DanglingReference,
                    format!("entities[{i}].roles[{j}]"),
                    format!("role references missing event `{}`", role.event_id),
                ),
                Some(ev) => {
                    if !ev
                        .arguments
                        .iter()
                        .any(|a| a.entity_id == ent.id && a.role == role.role)
                    {
                        push(
                            ViolationKind::RoleMismatch,
                            format!("entities[{i}].roles[{j}]"),
                            format!(
                                "role `{}` in `{}` has no matching argument",
                                role.role, role.event_id
                            ),
                        );
                    }
                }
            }
        }
    }
    for (i, ev) in record.events.iter().enumerate() {
        for (j, arg) in ev.arguments.iter().enumerate() {
            if let Some(ent) = record.entity(&arg.entity_id) {
                if !ent
                    .roles
                    .iter()
                    .any(|r| r.event_id == ev.id && r.role == arg.role)
                {
                    push(
                        ViolationKind::RoleMismatch,
                        format!("events[{i}].arguments[{j}]"),
                        format!(
                            "entity `{}` does not list role `{}` for `{}`",
                            ent.id, arg.role, ev.id
                        ),
                    );
                }
            }
        }
    }
    out
}

/// Reads and validates a JSONL corpus. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, ontology: &EventOntology) -> Result<Vec<SentenceRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SentenceRecord =
            serde_json::from_str(&line).map_err(|source| Error::Parse {
                line: idx + 1,
                source,
            })?;
        if let Some(v) = validate_record(&record, ontology).into_iter().next() {
            return Err(Error::Validation {
                record: record.key(),
                field: v.field,
                message: v.message,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_corpus(path: &Path, ontology: &EventOntology) -> Result<Vec<SentenceRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), ontology)
}

pub fn write_corpus(path: &Path, records: &[SentenceRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Parse {
            line: idx + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Builds sentence text and token offsets from word pieces.
///
/// Each pushed word is separated from the previous one by a single space
/// unless it is glued (closing punctuation).
#[derive(Debug, Default, Clone)]
pub struct SentenceBuilder {
    text: String,
    len: usize,
    tokens: Vec<Token>,
}

impl SentenceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a word and returns its character span.
    pub fn push(&mut self, word: &str) -> (usize, usize) {
        if !self.tokens.is_empty() {
            self.text.push(' ');
            self.len += 1;
        }
        self.push_raw(word)
    }

    pub fn glue(&mut self, word: &str) -> (usize, usize) {
        self.push_raw(word)
    }

    fn push_raw(&mut self, word: &str) -> (usize, usize) {
        let start = self.len;
        self.text.push_str(word);
        self.len += char_len(word);
        self.tokens.push(Token {
            text: word.to_string(),
            char_start: start,
            char_end: self.len,
        });
        (start, self.len)
    }

    /// Pushes a run of space-separated words; returns the span of the run.
    pub fn push_words(&mut self, words: &str) -> (usize, usize) {
        let mut span: Option<(usize, usize)> = None;
        for w in words.split_whitespace() {
            let (s, e) = self.push(w);
            span = Some(match span {
                None => (s, e),
                Some((s0, _)) => (s0, e),
            });
        }
        span.unwrap_or((self.len, self.len))
    }

    pub fn finish(self, doc_id: &str, sent_id: &str) -> SentenceRecord {
        SentenceRecord {
            doc_id: doc_id.to_string(),
            sent_id: sent_id.to_string(),
            text: self.text,
            tokens: self.tokens,
            entities: Vec::new(),
            events: Vec::new(),
        }
    }
}

/// Per-type counts of gold triggers, useful for corpus summaries.
pub fn event_type_counts(records: &[SentenceRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for ev in records.iter().flat_map(|r| &r.events) {
        *counts.entry(ev.event_type.clone()).or_insert(0) += 1;
    }
    counts
}


#[cfg(test)]
mod tests {
    use super::fixtures::police_sentence;
    use super::*;

    #[test]
    fn char_slice_handles_multibyte() {
        let t = "héllo wörld";
        assert_eq!(char_slice(t, 0, 5), Some("héllo"));
        assert_eq!(char_slice(t, 6, 11), Some("wörld"));
        assert_eq!(char_slice(t, 11, 11), Some(""));
        assert_eq!(char_slice(t, 6, 12), None);
        assert_eq!(char_slice(t, 3, 2), None);
    }

    #[test]
    fn police_sentence_is_valid() {
        let rec = police_sentence();
        assert_eq!(
            rec.text,
            "Police have arrested four people in connection with the killings."
        );
        assert!(validate_record(&rec, &EventOntology::ace2005()).is_empty());
        assert_eq!(rec.slice(rec.events[0].trigger_start, rec.events[0].trigger_end), Some("killings"));
    }

    #[test]
    fn unknown_event_type_is_one_violation() {
        let mut rec = police_sentence();
        rec.events[1].event_type = "Banquet".into();
        let v = validate_record(&rec, &EventOntology::ace2005());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::UnknownEventType);
    }

    #[test]
    fn dangling_role_is_one_violation() {
        let mut rec = police_sentence();
        rec.entities[0].roles.push(RoleRef {
            event_id: "ev9".into(),
            role: "Agent".into(),
        });
        let v = validate_record(&rec, &EventOntology::ace2005());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::DanglingReference);
    }

    #[test]
    fn split_token_trigger_is_rejected() {
        let mut rec = police_sentence();
        rec.events[0].trigger_end -= 2;
        let v = validate_record(&rec, &EventOntology::ace2005());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::TriggerOffsets);
    }

    #[test]
    fn load_corpus_reports_validation_and_parse_errors() {
        let ace = EventOntology::ace2005();
        let good = serde_json::to_string(&police_sentence()).unwrap();
        let mut bad_rec = police_sentence();
        bad_rec.events[0].trigger_start += 1;
        let bad = serde_json::to_string(&bad_rec).unwrap();

        let recs = read_corpus(good.as_bytes(), &ace).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].events.len(), 2);
        assert_eq!(recs[0].entities.len(), 2);

        assert!(read_corpus("".as_bytes(), &ace).unwrap().is_empty());

        match read_corpus(bad.as_bytes(), &ace) {
            Err(Error::Validation { record, field, .. }) => {
                assert_eq!(record, "doc1/s1");
                assert_eq!(field, "events[0].trigger");
            }
            other => panic!("expected validation error, got {other:?}"),
        }

        let text = format!("{good}\n{{not json\n");
        match read_corpus(text.as_bytes(), &ace) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn json_field_names_follow_schema() {
        let v = serde_json::to_value(police_sentence()).unwrap();
        assert!(v["tokens"][0].get("start").is_some());
        assert_eq!(v["entities"][0]["type"], "PER");
        assert_eq!(v["entities"][0]["roles"][0]["event_id"], "ev1");
        assert_eq!(v["events"][0]["type"], "Die");
        assert!(v["events"][0].get("trigger_start").is_some());
        assert_eq!(v["events"][0]["arguments"][1]["role"], "Person");
    }

    #[test]
    fn removing_event_types_drops_roles() {
        let rec = police_sentence();
        let types: BTreeSet<String> = ["Die".to_string()].into();
        let out = rec.without_event_types(&types);
        assert_eq!(out.events.len(), 1);
        assert!(out.entities.iter().all(|e| e.roles.is_empty()));
        assert!(validate_record(&out, &EventOntology::ace2005()).is_empty());
        assert_eq!(out.text, rec.text);
    }
}
