//! Text normalization shared by every embedding path.

use std::collections::HashSet;

const SHIPPED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// A set of words dropped during cleaning.
#[derive(Debug, Clone, Default)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// The English list shipped in `data/stopwords_en.txt`.
    pub fn english() -> Self {
        Self::parse(SHIPPED_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }
}

/// Lowercases, replaces everything except `[a-z0-9]`, intra-word hyphens and
/// whitespace with a space, drops stopwords and collapses whitespace.
pub fn clean_text(raw: &str, stopwords: &Stopwords) -> String {
    let chars: Vec<char> = raw.to_lowercase().chars().collect();
    let keep = |c: char| c.is_ascii_lowercase() || c.is_ascii_digit();
    let mut normalized = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let kept = if keep(c) {
            true
        } else if c == '-' {
            i > 0 && i + 1 < chars.len() && keep(chars[i - 1]) && keep(chars[i + 1])
        } else {
            false
        };
        normalized.push(if kept { c } else { ' ' });
    }
    let mut out = String::with_capacity(normalized.len());
    for word in normalized.split_whitespace() {
        if stopwords.contains(word) {
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Cleaning with the shipped English stopword list.
#[derive(Debug, Clone)]
pub struct Cleaner {
    stopwords: Stopwords,
}

impl Default for Cleaner {
    fn default() -> Self {
        Self {
            stopwords: Stopwords::english(),
        }
    }
}

impl Cleaner {
    pub fn new(stopwords: Stopwords) -> Self {
        Self { stopwords }
    }

    pub fn clean(&self, raw: &str) -> String {
        clean_text(raw, &self.stopwords)
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }
}
