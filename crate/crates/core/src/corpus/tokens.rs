//! Word tokens and fixed-length sequences for the static path.

use serde::{Deserialize, Serialize};

/// Pad token for word sequences. Cleaned text can never produce it.
pub const PAD_TOKEN: &str = "<pad>";
/// Unknown-word token for word vocabularies.
pub const UNK_TOKEN: &str = "<unk>";

/// Words considered per requirement text.
pub const DEFAULT_MAX_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub truncated: bool,
    pub pad_count: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens before the pad suffix.
    pub fn real_tokens(&self) -> &[String] {
        &self.tokens[..self.tokens.len() - self.pad_count]
    }
}

/// Splits cleaned text on whitespace.
pub fn tokenize_words(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: text.split_whitespace().map(str::to_string).collect(),
        truncated: false,
        pad_count: 0,
    }
}

/// Cuts or pads to exactly `max_len` tokens. Existing pads are stripped first.
pub fn truncate_pad(seq: &TokenSequence, max_len: usize) -> TokenSequence {
    assert!(max_len >= 1, "max_len must be at least 1");
    let real = seq.real_tokens();
    let truncated = seq.truncated || real.len() > max_len;
    let mut tokens: Vec<String> = real.iter().take(max_len).cloned().collect();
    let pad_count = max_len - tokens.len();
    tokens.extend(std::iter::repeat_n(PAD_TOKEN.to_string(), pad_count));
    TokenSequence {
        tokens,
        truncated,
        pad_count,
    }
}
