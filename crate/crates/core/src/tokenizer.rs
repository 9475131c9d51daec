//! Tokenizer adapters.
//!
//! [`WordTokenizer`] is a deterministic whitespace-and-punctuation tokenizer
//! with a closed vocabulary. Registered reserved tokens (entity markers) are
//! always emitted as a single subtoken.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubToken {
    pub id: u32,
    /// Character offsets into the tokenized text.
    pub start: usize,
    pub end: usize,
}

pub trait TokenizerAdapter: Send + Sync {
    fn subtokenize(&self, text: &str) -> Vec<SubToken>;
    fn cls_id(&self) -> u32;
    fn sep_id(&self) -> u32;
    fn pad_id(&self) -> u32;
    fn unk_id(&self) -> u32;
    fn is_reserved(&self, id: u32) -> bool;
    fn reserved_tokens(&self) -> &[String];
    fn token(&self, id: u32) -> &str;
    fn vocab_size(&self) -> usize;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordTokenizer {
    lowercase: bool,
    vocab: Vec<String>,
    reserved: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl PartialEq for WordTokenizer {
    fn eq(&self, other: &Self) -> bool {
        self.lowercase == other.lowercase
            && self.vocab == other.vocab
            && self.reserved == other.reserved
    }
}

/// Splits `text` into whitespace-delimited chunks, then alphanumeric runs and
/// single punctuation characters. Offsets are in characters.
fn pre_tokenize<'a>(text: &'a str, reserved: &dyn Fn(&str) -> bool) -> Vec<(&'a str, usize, usize)> {
    let mut out = Vec::new();
    let mut chunk_start: Option<(usize, usize)> = None; // (byte, char)
    let mut char_pos = 0usize;
    let bytes_chars: Vec<(usize, char)> = text.char_indices().collect();

    let flush = |from: (usize, usize), to_byte: usize, to_char: usize, out: &mut Vec<(&'a str, usize, usize)>| {
        let chunk = &text[from.0..to_byte];
        if reserved(chunk) {
            out.push((chunk, from.1, to_char));
            return;
        }
        let mut run: Option<(usize, usize)> = None;
        let mut cpos = from.1;
        for (b, c) in chunk.char_indices() {
            if c.is_alphanumeric() {
                if run.is_none() {
                    run = Some((b, cpos));
                }
            } else {
                if let Some((rb, rc)) = run.take() {
                    out.push((&chunk[rb..b], rc, cpos));
                }
                out.push((&chunk[b..b + c.len_utf8()], cpos, cpos + 1));
            }
            cpos += 1;
        }
        if let Some((rb, rc)) = run {
            out.push((&chunk[rb..], rc, cpos));
        }
    };

    for &(b, c) in &bytes_chars {
        if c.is_whitespace() {
            if let Some(from) = chunk_start.take() {
                flush(from, b, char_pos, &mut out);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some((b, char_pos));
        }
        char_pos += 1;
    }
    if let Some(from) = chunk_start {
        flush(from, text.len(), char_pos, &mut out);
    }
    out
}

impl WordTokenizer {
    /// Builds a vocabulary from every piece found in `texts`, sorted.
    pub fn build<'a, I>(texts: I, lowercase: bool) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words = BTreeSet::new();
        for text in texts {
            for (piece, _, _) in pre_tokenize(text, &|_| false) {
                words.insert(if lowercase {
                    piece.to_lowercase()
                } else {
                    piece.to_string()
                });
            }
        }
        let specials = [PAD, UNK, CLS, SEP];
        let vocab: Vec<String> = specials
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().filter(|w| !specials.contains(&w.as_str())))
            .collect();
        let mut tok = WordTokenizer {
            lowercase,
            vocab,
            reserved: Vec::new(),
            index: HashMap::new(),
        };
        tok.reindex();
        tok
    }

    fn reindex(&mut self) {
        self.index = self
            .vocab
            .iter()
            .chain(&self.reserved)
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    /// Appends reserved tokens not yet known; returns how many were added.
    pub fn register_reserved_tokens<S: AsRef<str>>(&mut self, tokens: &[S]) -> Result<usize> {
        let mut added = 0;
        for t in tokens {
            let t = t.as_ref();
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::arg(format!("reserved token `{t}` must be a non-empty single word")));
            }
            if self.reserved.iter().any(|r| r == t) {
                continue;
            }
            self.reserved.push(t.to_string());
            added += 1;
        }
        self.reindex();
        Ok(added)
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn base_vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tok: WordTokenizer = serde_json::from_str(&raw)?;
        tok.reindex();
        Ok(tok)
    }
}

impl TokenizerAdapter for WordTokenizer {
    fn subtokenize(&self, text: &str) -> Vec<SubToken> {
        let reserved = |chunk: &str| self.reserved.iter().any(|r| r == chunk);
        pre_tokenize(text, &reserved)
            .into_iter()
            .map(|(piece, start, end)| {
                let id = if let Some(i) = self.reserved.iter().position(|r| r == piece) {
                    (self.vocab.len() + i) as u32
                } else {
                    let key = if self.lowercase {
                        piece.to_lowercase()
                    } else {
                        piece.to_string()
                    };
                    self.index
                        .get(&key)
                        .copied()
                        .filter(|&i| (i as usize) < self.vocab.len())
                        .unwrap_or(1)
                };
                SubToken { id, start, end }
            })
            .collect()
    }

    fn cls_id(&self) -> u32 {
        2
    }

    fn sep_id(&self) -> u32 {
        3
    }

    fn pad_id(&self) -> u32 {
        0
    }

    fn unk_id(&self) -> u32 {
        1
    }

    fn is_reserved(&self, id: u32) -> bool {
        let id = id as usize;
        id >= self.vocab.len() && id < self.vocab.len() + self.reserved.len()
    }

    fn reserved_tokens(&self) -> &[String] {
        &self.reserved
    }

    fn token(&self, id: u32) -> &str {
        let id = id as usize;
        if id < self.vocab.len() {
            &self.vocab[id]
        } else {
            self.reserved
                .get(id - self.vocab.len())
                .map(String::as_str)
                .unwrap_or(UNK)
        }
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len() + self.reserved.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> WordTokenizer {
        WordTokenizer::build(
            ["Police have arrested four people in connection with the killings.", "What is the Die?"],
            true,
        )
    }

    #[test]
    fn splits_words_and_punctuation() {
        let t = tok();
        let text = "Police have killings.";
        let subs = t.subtokenize(text);
        let pieces: Vec<&str> = subs.iter().map(|s| t.token(s.id)).collect();
        assert_eq!(pieces, vec!["police", "have", "killings", "."]);
        assert_eq!((subs[2].start, subs[2].end), (12, 20));
        assert_eq!((subs[3].start, subs[3].end), (20, 21));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let t = tok();
        let subs = t.subtokenize("zebras have");
        assert_eq!(subs[0].id, t.unk_id());
        assert_eq!(t.token(subs[1].id), "have");
    }

    #[test]
    fn reserved_markers_are_single_subtokens() {
        let mut t = tok();
        let before = t.vocab_size();
        assert_eq!(t.register_reserved_tokens(&["<E>", "</E>"]).unwrap(), 2);
        assert_eq!(t.register_reserved_tokens(&["<E>"]).unwrap(), 0);
        assert_eq!(t.vocab_size(), before + 2);
        let subs = t.subtokenize("<E> Police </E> have <X>");
        assert_eq!(t.token(subs[0].id), "<E>");
        assert!(t.is_reserved(subs[0].id));
        assert_eq!(t.token(subs[2].id), "</E>");
        // an unregistered marker falls apart into punctuation and a word
        assert_eq!(subs.len(), 7);
        assert!(!t.is_reserved(subs[4].id));
    }

    #[test]
    fn offsets_tile_monotonically() {
        let t = tok();
        let text = "Police, have (arrested) four-people!";
        let subs = t.subtokenize(text);
        let chars: Vec<char> = text.chars().collect();
        let mut last = 0;
        for s in &subs {
            assert!(s.start >= last && s.end > s.start);
            assert!(chars[last..s.start].iter().all(|c| c.is_whitespace()));
            last = s.end;
        }
        assert_eq!(last, chars.len());
    }

    #[test]
    fn save_load_round_trip() {
        let mut t = tok();
        t.register_reserved_tokens(&["<Agent>"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tok.json");
        t.save(&p).unwrap();
        let back = WordTokenizer::load(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.subtokenize("<Agent> police"), t.subtokenize("<Agent> police"));
    }
}
