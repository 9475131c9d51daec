//! Event trigger detection as multi-answer extractive question answering.
//!
//! A sentence is asked one question per event type ("What is the Attack?").
//! Its context is optionally augmented with entity position, entity type or
//! argument role markers, packed with the question for a transformer QA
//! encoder, and the start/end distributions are decoded into zero or more
//! trigger spans kept above a threshold calibrated on a development set.
//!
//! Module map:
//!
//! - [`corpus`]: sentence records, JSONL I/O, validation, synthetic corpora
//! - [`ontology`]: event subtypes and question templates
//! - [`markers`]: marker insertion with exact offset maps
//! - [`tokenizer`] and [`packing`]: subtokenization and `[CLS] q [SEP] c [SEP]` windows
//! - [`encoder`]: the encoder adapter trait, a trainable mock, fine-tuning
//! - [`decoding`]: n-best spans, containment dedup, threshold selection
//! - [`evaluation`]: trigger scoring and unseen-type splits
//! - [`interpret`]: gradient connectivity maps and `[CLS]` projections
//! - [`pipeline`]: config-driven commands used by the `eventqa` binary

pub mod corpus;
pub mod decoding;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod interpret;
pub mod markers;
pub mod ontology;
pub mod packing;
pub mod pipeline;
pub mod tokenizer;

pub use error::{Error, Result};
