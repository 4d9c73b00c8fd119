//! Word vocabularies with reserved pad/unknown entries.

use std::collections::HashMap;

use super::tokens::{PAD_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Dense token index. Specials occupy indices 0 (pad) and 1 (unknown).
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn with_specials() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            counts: Vec::new(),
            index: HashMap::new(),
        };
        v.push(PAD_TOKEN, 0);
        v.push(UNK_TOKEN, 0);
        v
    }

    fn push(&mut self, token: &str, count: u64) -> usize {
        let idx = self.tokens.len();
        self.tokens.push(token.to_string());
        self.counts.push(count);
        self.index.insert(token.to_string(), idx);
        idx
    }

    /// Builds from `(token, count)` pairs in index order, specials excluded.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, u64)>) -> Result<Self> {
        let mut v = Self::with_specials();
        for (token, count) in entries {
            if v.index.contains_key(&token) {
                return Err(Error::Config(format!("duplicate vocabulary entry `{token}`")));
            }
            v.push(&token, count);
        }
        Ok(v)
    }

    /// Adds a token at the end. Returns its index; existing tokens keep theirs.
    pub fn insert(&mut self, token: &str, count: u64) -> usize {
        match self.index.get(token) {
            Some(&i) => i,
            None => self.push(token, count),
        }
    }

    pub fn add_count(&mut self, idx: usize, count: u64) {
        self.counts[idx] += count;
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or [`UNK_INDEX`].
    pub fn index_of(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_special(&self, idx: usize) -> bool {
        idx == PAD_INDEX || idx == UNK_INDEX
    }

    /// Text form: one `token<TAB>count<TAB>index` line per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, (t, c)) in self.tokens.iter().zip(&self.counts).enumerate() {
            s.push_str(&format!("{t}\t{c}\t{i}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let mut parts = line.split('\t');
            let (Some(t), Some(c), Some(i)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Checkpoint(format!("malformed vocabulary line {}", line_no + 1)));
            };
            let c: u64 = c.parse().map_err(|_| Error::Checkpoint(format!("bad count on line {}", line_no + 1)))?;
            let i: usize = i.parse().map_err(|_| Error::Checkpoint(format!("bad index on line {}", line_no + 1)))?;
            if i != tokens.len() {
                return Err(Error::Checkpoint(format!("non-dense index {i} on line {}", line_no + 1)));
            }
            tokens.push(t.to_string());
            counts.push(c);
        }
        if tokens.len() < 2 || tokens[PAD_INDEX] != PAD_TOKEN || tokens[UNK_INDEX] != UNK_TOKEN {
            return Err(Error::Checkpoint("vocabulary is missing its special entries".into()));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { tokens, counts, index })
    }
}

/// Counts whitespace tokens over cleaned texts.
pub fn count_tokens<'a>(texts: impl IntoIterator<Item = &'a str>) -> HashMap<String, u64> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for text in texts {
        for tok in text.split_whitespace() {
            *counts.entry(tok.to_string()).or_default() += 1;
        }
    }
    counts
}

/// Keeps tokens seen at least `min_count` times, most frequent first,
/// ties broken lexicographically.
pub fn build_word_vocab<'a>(cleaned: impl IntoIterator<Item = &'a str>, min_count: usize) -> Result<Vocabulary> {
    assert!(min_count >= 1, "min_count must be at least 1");
    let mut kept: Vec<(String, u64)> = count_tokens(cleaned)
        .into_iter()
        .filter(|(_, c)| *c >= min_count as u64)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary(min_count));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_entries(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_by_count_then_lexicographic() {
        let v = build_word_vocab(["a a b"], 1).unwrap();
        assert_eq!(v.tokens(), &[PAD_TOKEN, UNK_TOKEN, "a", "b"]);
        let v = build_word_vocab(["c b a b c"], 1).unwrap();
        assert_eq!(&v.tokens()[2..], &["b", "c", "a"]);
    }

    #[test]
    fn min_count_threshold() {
        let v = build_word_vocab(["a a b"], 2).unwrap();
        assert_eq!(v.tokens(), &[PAD_TOKEN, UNK_TOKEN, "a"]);
        assert_eq!(v.index_of("b"), UNK_INDEX);
    }

    #[test]
    fn empty_after_threshold() {
        assert!(matches!(build_word_vocab(["x y"], 3), Err(Error::EmptyVocabulary(3))));
    }

    #[test]
    fn text_round_trip() {
        let v = build_word_vocab(["deploy deploy cluster node"], 1).unwrap();
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.get("cluster"), v.get("cluster"));
    }

    #[test]
    fn indices_are_dense() {
        let v = build_word_vocab(["q w e r t y q w"], 1).unwrap();
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.get(t), Some(i));
        }
    }
}
