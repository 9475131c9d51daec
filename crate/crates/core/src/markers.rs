//! Entity and argument marker insertion.
//!
//! Markers are standalone, space-delimited tokens wrapped around entity
//! mentions: `<E> … </E>` (position), `<PER> … </PER>` (entity type) or one
//! tag per argument role (`<Agent> … </Agent>`). Every augmented sentence
//! keeps an exact character map back to the original text.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, SentenceRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerMode {
    #[default]
    None,
    EntityPosition,
    EntityType,
    ArgumentRole,
}

impl MarkerMode {
    pub const ALL: [MarkerMode; 4] = [
        MarkerMode::None,
        MarkerMode::EntityPosition,
        MarkerMode::EntityType,
        MarkerMode::ArgumentRole,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarkerMode::None => "none",
            MarkerMode::EntityPosition => "entity_position",
            MarkerMode::EntityType => "entity_type",
            MarkerMode::ArgumentRole => "argument_role",
        }
    }
}

impl fmt::Display for MarkerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for MarkerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MarkerMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::arg(format!("unknown marker mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToAugmented,
    ToOriginal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertedMarker {
    pub token: String,
    /// Character position of the marker's first character in the augmented text.
    pub char_pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSentence {
    pub original: SentenceRecord,
    pub mode: MarkerMode,
    pub text: String,
    pub inserted: Vec<InsertedMarker>,
    to_augmented: Vec<usize>,
    to_original: Vec<Option<usize>>,
}

struct MarkedEntity<'a> {
    id: &'a str,
    start: usize,
    end: usize,
    open: Vec<String>,
    close: Vec<String>,
}

fn marked_entities(record: &SentenceRecord, mode: MarkerMode) -> Vec<MarkedEntity<'_>> {
    let mut out: Vec<MarkedEntity<'_>> = record
        .entities
        .iter()
        .filter_map(|ent| {
            let tags: Vec<String> = match mode {
                MarkerMode::None => return None,
                MarkerMode::EntityPosition => vec!["E".to_string()],
                MarkerMode::EntityType => vec![ent.entity_type.clone()],
                MarkerMode::ArgumentRole => {
                    let roles = record.roles_of(&ent.id);
                    if roles.is_empty() {
                        return None;
                    }
                    roles.into_iter().map(|r| r.role).collect()
                }
            };
            Some(MarkedEntity {
                id: &ent.id,
                start: ent.char_start,
                end: ent.char_end,
                open: tags.iter().map(|t| format!("<{t}>")).collect(),
                close: tags.iter().rev().map(|t| format!("</{t}>")).collect(),
            })
        })
        .collect();
    out.sort_by_key(|m| (m.start, m.end));
    out
}

/// Marker tokens a corpus pass would emit in `mode`, sorted.
pub fn marker_inventory(records: &[SentenceRecord], mode: MarkerMode) -> Vec<String> {
    let mut set = BTreeSet::new();
    for r in records {
        for m in marked_entities(r, mode) {
            set.extend(m.open);
            set.extend(m.close);
        }
    }
    set.into_iter().collect()
}

struct Writer {
    text: String,
    to_original: Vec<Option<usize>>,
    inserted: Vec<InsertedMarker>,
}

impl Writer {
    fn last_is_space(&self) -> bool {
        self.text.chars().next_back().is_none_or(char::is_whitespace)
    }

    fn pad(&mut self) {
        self.text.push(' ');
        self.to_original.push(None);
    }

    fn marker(&mut self, tag: &str) {
        if !self.last_is_space() {
            self.pad();
        }
        self.inserted.push(InsertedMarker {
            token: tag.to_string(),
            char_pos: self.to_original.len(),
        });
        for c in tag.chars() {
            self.text.push(c);
            self.to_original.push(None);
        }
    }
}

pub fn augment(record: &SentenceRecord, mode: MarkerMode) -> Result<AugmentedSentence> {
    let marked = marked_entities(record, mode);
    for pair in marked.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::OverlappingEntities {
                record: record.key(),
                first: pair[0].id.to_string(),
                second: pair[1].id.to_string(),
            });
        }
    }

    let chars: Vec<char> = record.text.chars().collect();
    let mut w = Writer {
        text: String::with_capacity(record.text.len() + 16 * marked.len()),
        to_original: Vec::with_capacity(chars.len()),
        inserted: Vec::new(),
    };
    let mut to_augmented = Vec::with_capacity(chars.len());
    let mut next = marked.iter().peekable();
    let mut open_until: Vec<&MarkedEntity<'_>> = Vec::new();

    for (i, &c) in chars.iter().enumerate() {
        while let Some(m) = next.next_if(|m| m.start == i) {
            for tag in &m.open {
                w.marker(tag);
                w.pad();
            }
            open_until.push(m);
        }
        to_augmented.push(w.to_original.len());
        w.text.push(c);
        w.to_original.push(Some(i));
        while let Some(pos) = open_until.iter().position(|m| m.end == i + 1) {
            let m = open_until.remove(pos);
            for tag in &m.close {
                w.marker(tag);
            }
            if chars.get(i + 1).is_some_and(|c| !c.is_whitespace()) {
                w.pad();
            }
        }
    }

    Ok(AugmentedSentence {
        original: record.clone(),
        mode,
        text: w.text,
        inserted: w.inserted,
        to_augmented,
        to_original: w.to_original,
    })
}

impl AugmentedSentence {
    pub fn augmented_len(&self) -> usize {
        self.to_original.len()
    }

    pub fn original_len(&self) -> usize {
        self.to_augmented.len()
    }

    pub fn to_augmented(&self, original_char: usize) -> Option<usize> {
        self.to_augmented.get(original_char).copied()
    }

    pub fn to_original(&self, augmented_char: usize) -> Option<usize> {
        self.to_original.get(augmented_char).copied().flatten()
    }

    /// True when the augmented character was inserted (marker or padding).
    pub fn is_inserted(&self, augmented_char: usize) -> bool {
        matches!(self.to_original.get(augmented_char), Some(None))
    }

    /// Augmented text with every inserted character removed.
    pub fn strip(&self) -> String {
        self.text
            .chars()
            .zip(&self.to_original)
            .filter(|(_, o)| o.is_some())
            .map(|(c, _)| c)
            .collect()
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        char_slice(&self.text, start, end)
    }

    /// Maps a character span between coordinate systems.
    ///
    /// Towards the original, inserted characters at either boundary are
    /// trimmed; a span made only of inserted characters is unmappable.
    pub fn remap_span(&self, start: usize, end: usize, direction: Direction) -> Result<(usize, usize)> {
        let unmappable = |reason: &str| Error::Unmappable {
            start,
            end,
            reason: reason.to_string(),
        };
        if start >= end {
            return Err(unmappable("empty span"));
        }
        match direction {
            Direction::ToAugmented => {
                if end > self.original_len() {
                    return Err(unmappable("outside original text"));
                }
                Ok((self.to_augmented[start], self.to_augmented[end - 1] + 1))
            }
            Direction::ToOriginal => {
                if end > self.augmented_len() {
                    return Err(unmappable("outside augmented text"));
                }
                let first = (start..end).find_map(|i| self.to_original[i]);
                let last = (start..end).rev().find_map(|i| self.to_original[i]);
                match (first, last) {
                    (Some(s), Some(e)) => Ok((s, e + 1)),
                    _ => Err(unmappable("span covers only marker characters")),
                }
            }
        }
    }
}
