//! Event-type ontology and the per-type question template.
//!
//! Questions and scoring operate at subtype granularity. The ACE 2005
//! inventory (33 subtypes under 8 parent types) ships as a bundled asset.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ACE_ONTOLOGY_JSON: &str = include_str!("../assets/ace2005_ontology.json");

/// Event types held out of training in the published unseen-type experiment.
pub const ACE_UNSEEN_PRESET: [&str; 6] = [
    "Marry",
    "Trial-Hearing",
    "Arrest-Jail",
    "Acquit",
    "Attack",
    "Declare-Bankruptcy",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventOntology {
    subtypes: Vec<String>,
    #[serde(rename = "parents")]
    parent_of: BTreeMap<String, String>,
}

impl EventOntology {
    pub fn new(subtypes: Vec<String>, parent_of: BTreeMap<String, String>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &subtypes {
            if s.trim().is_empty() {
                return Err(Error::arg("empty event subtype name"));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::arg(format!("duplicate event subtype `{s}`")));
            }
        }
        for child in parent_of.keys() {
            if !seen.contains(child.as_str()) {
                return Err(Error::arg(format!(
                    "parent entry for unknown subtype `{child}`"
                )));
            }
        }
        Ok(EventOntology {
            subtypes,
            parent_of,
        })
    }

    /// Flat ontology where every subtype is its own parent.
    pub fn from_subtypes<S: AsRef<str>>(subtypes: &[S]) -> Result<Self> {
        let subtypes: Vec<String> = subtypes.iter().map(|s| s.as_ref().to_string()).collect();
        let parents = subtypes.iter().map(|s| (s.clone(), s.clone())).collect();
        EventOntology::new(subtypes, parents)
    }

    pub fn ace2005() -> Self {
        let raw: EventOntology =
            serde_json::from_str(ACE_ONTOLOGY_JSON).expect("bundled ACE ontology parses");
        EventOntology::new(raw.subtypes, raw.parent_of).expect("bundled ACE ontology is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: EventOntology = serde_json::from_str(&raw)?;
        EventOntology::new(parsed.subtypes, parsed.parent_of)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    /// Keeps only `keep`, preserving ontology order.
    pub fn restrict<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        for k in keep {
            if !self.contains(k.as_ref()) {
                return Err(Error::arg(format!("unknown event type `{}`", k.as_ref())));
            }
        }
        let subtypes: Vec<String> = self
            .subtypes
            .iter()
            .filter(|s| keep.iter().any(|k| k.as_ref() == s.as_str()))
            .cloned()
            .collect();
        let parent_of = self
            .parent_of
            .iter()
            .filter(|(k, _)| subtypes.contains(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        EventOntology::new(subtypes, parent_of)
    }

    pub fn subtypes(&self) -> &[String] {
        &self.subtypes
    }

    pub fn len(&self) -> usize {
        self.subtypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtypes.is_empty()
    }

    pub fn contains(&self, event_type: &str) -> bool {
        self.subtypes.iter().any(|s| s == event_type)
    }

    pub fn parent_of(&self, subtype: &str) -> Option<&str> {
        self.parent_of.get(subtype).map(String::as_str)
    }

    pub fn parent_types(&self) -> Vec<&str> {
        let mut parents: Vec<&str> = self.parent_of.values().map(String::as_str).collect();
        parents.sort_unstable();
        parents.dedup();
        parents
    }

    pub fn question_for(&self, event_type: &str, style: QuestionStyle) -> Result<String> {
        if !self.contains(event_type) {
            return Err(Error::arg(format!("unknown event type `{event_type}`")));
        }
        Ok(style.render(event_type))
    }

    /// One `(event_type, question)` pair per subtype, in ontology order.
    pub fn all_questions(&self, style: QuestionStyle) -> Vec<(String, String)> {
        self.subtypes
            .iter()
            .map(|s| (s.clone(), style.render(s)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionStyle {
    #[default]
    WithArticle,
    Bare,
}

impl QuestionStyle {
    fn render(self, event_type: &str) -> String {
        match self {
            QuestionStyle::WithArticle => format!("What is the {event_type}?"),
            QuestionStyle::Bare => format!("What is {event_type}?"),
        }
    }
}

impl fmt::Display for QuestionStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            QuestionStyle::WithArticle => "with_article",
            QuestionStyle::Bare => "bare",
        })
    }
}

impl FromStr for QuestionStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with_article" => Ok(QuestionStyle::WithArticle),
            "bare" => Ok(QuestionStyle::Bare),
            other => Err(Error::arg(format!("unknown question style `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ace_has_33_subtypes_under_8_parents() {
        let ace = EventOntology::ace2005();
        assert_eq!(ace.len(), 33);
        assert_eq!(ace.parent_types().len(), 8);
        assert_eq!(ace.parent_of("Attack"), Some("Conflict"));
        assert_eq!(ace.parent_of("Demonstrate"), Some("Conflict"));
        for t in ACE_UNSEEN_PRESET {
            assert!(ace.contains(t), "{t}");
        }
    }

    #[test]
    fn question_templates() {
        let ace = EventOntology::ace2005();
        assert_eq!(
            ace.question_for("Attack", QuestionStyle::WithArticle).unwrap(),
            "What is the Attack?"
        );
        assert_eq!(
            ace.question_for("Arrest-Jail", QuestionStyle::Bare).unwrap(),
            "What is Arrest-Jail?"
        );
        assert_eq!(
            ace.question_for("Die", QuestionStyle::Bare).unwrap(),
            "What is Die?"
        );
        assert!(matches!(
            ace.question_for("Banquet", QuestionStyle::Bare),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn all_questions_follow_ontology_order() {
        let ace = EventOntology::ace2005();
        let qs = ace.all_questions(QuestionStyle::WithArticle);
        assert_eq!(qs.len(), 33);
        let distinct: std::collections::BTreeSet<_> = qs.iter().map(|(_, q)| q).collect();
        assert_eq!(distinct.len(), 33);
        for ((t, q), s) in qs.iter().zip(ace.subtypes()) {
            assert_eq!(t, s);
            assert!(q.contains(s.as_str()));
        }

        let one = EventOntology::from_subtypes(&["Meet"]).unwrap();
        assert_eq!(one.all_questions(QuestionStyle::Bare).len(), 1);

        let ab = EventOntology::from_subtypes(&["A", "B"]).unwrap();
        assert_eq!(
            ab.all_questions(QuestionStyle::Bare),
            vec![
                ("A".to_string(), "What is A?".to_string()),
                ("B".to_string(), "What is B?".to_string())
            ]
        );
    }

    #[test]
    fn duplicate_subtypes_rejected() {
        assert!(EventOntology::from_subtypes(&["A", "A"]).is_err());
    }

    #[test]
    fn restrict_keeps_order_and_parents() {
        let ace = EventOntology::ace2005();
        let sub = ace.restrict(&["Attack", "Die", "Transport"]).unwrap();
        assert_eq!(sub.subtypes(), &["Die", "Transport", "Attack"]);
        assert_eq!(sub.parent_of("Die"), Some("Life"));
        assert!(ace.restrict(&["Nope"]).is_err());
    }

    #[test]
    fn ontology_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ontology.json");
        let ace = EventOntology::ace2005();
        ace.save(&path).unwrap();
        assert_eq!(EventOntology::load(&path).unwrap(), ace);
    }
}
