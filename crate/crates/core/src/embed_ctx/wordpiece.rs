//! WordPiece vocabulary induction and greedy longest-match tokenization.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::corpus::UnlabeledCorpus;
use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";
pub const SPECIALS: [&str; 5] = [PAD, UNK, CLS, SEP, MASK];

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

pub const CONTINUATION: &str = "##";

/// Words longer than this many characters map straight to `[UNK]`.
pub const MAX_WORD_CHARS: usize = 100;

/// Subword inventory with the five specials at indices 0 to 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPieceVocab {
    pieces: Vec<String>,
    index: HashMap<String, u32>,
}

impl WordPieceVocab {
    /// Builds from pieces in index order. The specials must come first.
    pub fn from_pieces(pieces: Vec<String>) -> Result<Self> {
        if pieces.len() < SPECIALS.len() || pieces.iter().zip(SPECIALS).any(|(p, s)| p != s) {
            return Err(Error::Config(format!(
                "wordpiece vocabulary must start with {}",
                SPECIALS.join(" ")
            )));
        }
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            if p.is_empty() || p.contains(char::is_whitespace) {
                return Err(Error::Config(format!("invalid wordpiece `{p}` at index {i}")));
            }
            if index.insert(p.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate wordpiece `{p}`")));
            }
        }
        Ok(Self { pieces, index })
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn get(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> &str {
        &self.pieces[id as usize]
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < SPECIALS.len()
    }

    /// `vocab.txt` form: one piece per line, line number is the index.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.pieces {
            s.push_str(p);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pieces(text.lines().map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Greedy longest-match-first split of one word. A word that cannot be
    /// covered completely becomes a single `[UNK]`.
    pub fn split_word(&self, word: &str) -> Vec<u32> {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            return vec![UNK_ID];
        }
        let mut out = Vec::new();
        let mut start = 0;
        let mut candidate = String::new();
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION);
                }
                candidate.extend(&chars[start..end]);
                if let Some(id) = self.get(&candidate) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => out.push(id),
                None => return vec![UNK_ID],
            }
            start = end;
        }
        out
    }

    /// Pieces for a whole text, without framing.
    pub fn split_text(&self, text: &str) -> Vec<u32> {
        pre_tokenize(text).iter().flat_map(|w| self.split_word(w)).collect()
    }
}

/// Lowercases, splits on whitespace, and isolates every character that is
/// neither alphanumeric nor whitespace as its own word.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_whitespace() {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        } else if c.is_alphanumeric() {
            current.push(c);
        } else {
            if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
            words.push(c.to_string());
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words
}

/// Token ids with `[CLS] A [SEP] (B [SEP])` framing and segment ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn frame(a: &[u32], b: Option<&[u32]>) -> Self {
        let mut ids = Vec::with_capacity(a.len() + b.map_or(0, <[u32]>::len) + 3);
        ids.push(CLS_ID);
        ids.extend_from_slice(a);
        ids.push(SEP_ID);
        let mut segments = vec![0u8; ids.len()];
        if let Some(b) = b {
            ids.extend_from_slice(b);
            ids.push(SEP_ID);
            segments.resize(ids.len(), 1);
        }
        Self { ids, segments }
    }
}

pub fn tokenize_wordpiece(vocab: &WordPieceVocab, text: &str, pair: Option<&str>) -> Encoding {
    let a = vocab.split_text(text);
    let b = pair.map(|p| vocab.split_text(p));
    Encoding::frame(&a, b.as_deref())
}

/// Like [`tokenize_wordpiece`] but fits the result into `max_len` ids by
/// dropping trailing pieces, always from the longer segment.
pub fn tokenize_wordpiece_truncated(
    vocab: &WordPieceVocab,
    text: &str,
    pair: Option<&str>,
    max_len: usize,
) -> Result<Encoding> {
    let framing = if pair.is_some() { 3 } else { 2 };
    if max_len < framing {
        return Err(Error::Config(format!("max length {max_len} leaves no room for framing")));
    }
    let mut a = vocab.split_text(text);
    let mut b = pair.map(|p| vocab.split_text(p));
    truncate_pair(&mut a, b.as_mut(), max_len - framing);
    Ok(Encoding::frame(&a, b.as_deref()))
}

/// Trims the longer of `a` and `b` one piece at a time until they fit.
pub fn truncate_pair(a: &mut Vec<u32>, mut b: Option<&mut Vec<u32>>, budget: usize) {
    loop {
        let b_len = b.as_ref().map_or(0, |b| b.len());
        if a.len() + b_len <= budget {
            return;
        }
        match b.as_mut() {
            Some(b) if b.len() > a.len() => {
                b.pop();
            }
            _ => {
                a.pop();
            }
        }
    }
}

fn strip(piece: &str) -> &str {
    piece.strip_prefix(CONTINUATION).unwrap_or(piece)
}

fn merged(left: &str, right: &str) -> String {
    format!("{left}{}", strip(right))
}

type PairKey = (u32, u32);
/// Priority: higher count, then smaller merged text, then word-initial first.
type Rank = (Reverse<u64>, String, bool, PairKey);

struct Induction {
    symbols: Vec<String>,
    symbol_index: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<PairKey, u64>,
    pair_words: HashMap<PairKey, BTreeSet<usize>>,
    queue: BTreeSet<Rank>,
}

impl Induction {
    fn symbol(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.symbol_index.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(s.to_string());
        self.symbol_index.insert(s.to_string(), id);
        id
    }

    fn rank(&self, key: PairKey, count: u64) -> Rank {
        let m = merged(&self.symbols[key.0 as usize], &self.symbols[key.1 as usize]);
        let continuation = m.starts_with(CONTINUATION);
        (Reverse(count), strip(&m).to_string(), continuation, key)
    }

    fn adjust(&mut self, key: PairKey, delta: i64, word: usize) {
        let old = self.pair_counts.get(&key).copied().unwrap_or(0);
        if old > 0 {
            let r = self.rank(key, old);
            self.queue.remove(&r);
        }
        let new = (old as i64 + delta) as u64;
        if new > 0 {
            self.pair_counts.insert(key, new);
            let r = self.rank(key, new);
            self.queue.insert(r);
        } else {
            self.pair_counts.remove(&key);
        }
        if delta > 0 {
            self.pair_words.entry(key).or_default().insert(word);
        }
    }

    fn add_word_pairs(&mut self, w: usize, sign: i64) {
        let (syms, count) = self.words[w].clone();
        for pair in syms.windows(2) {
            self.adjust((pair[0], pair[1]), sign * count as i64, w);
        }
    }
}

/// Induces a WordPiece inventory of (at most) `size` entries from the
/// corpus. The base alphabet holds the specials and every corpus character
/// in both word-initial and `##` continuation form; the highest-count
/// adjacent merge is added repeatedly until `size` is reached or no pair
/// remains.
pub fn build_wordpiece_vocab(corpus: &UnlabeledCorpus, size: usize) -> Result<WordPieceVocab> {
    let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();
    for doc in corpus.documents() {
        for w in pre_tokenize(doc) {
            if w.chars().count() <= MAX_WORD_CHARS {
                *word_counts.entry(w).or_default() += 1;
            }
        }
    }
    if word_counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let chars: BTreeSet<char> = word_counts.keys().flat_map(|w| w.chars()).collect();
    let mut ind = Induction {
        symbols: Vec::new(),
        symbol_index: HashMap::new(),
        words: Vec::with_capacity(word_counts.len()),
        pair_counts: HashMap::new(),
        pair_words: HashMap::new(),
        queue: BTreeSet::new(),
    };
    let mut vocab: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    for &c in &chars {
        vocab.push(c.to_string());
    }
    for &c in &chars {
        vocab.push(format!("{CONTINUATION}{c}"));
    }
    if size < vocab.len() {
        return Err(Error::VocabSizeTooSmall {
            requested: size,
            base: vocab.len(),
        });
    }
    let mut in_vocab: BTreeSet<String> = vocab.iter().cloned().collect();
    for (word, count) in &word_counts {
        let syms: Vec<u32> = word
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let s = if i == 0 { c.to_string() } else { format!("{CONTINUATION}{c}") };
                ind.symbol(&s)
            })
            .collect();
        ind.words.push((syms, *count));
    }
    for w in 0..ind.words.len() {
        ind.add_word_pairs(w, 1);
    }
    while vocab.len() < size {
        let Some(best) = ind.queue.iter().next().cloned() else {
            break;
        };
        let key = best.3;
        let text = merged(&ind.symbols[key.0 as usize], &ind.symbols[key.1 as usize]);
        let new_sym = ind.symbol(&text);
        let affected: Vec<usize> = ind.pair_words.remove(&key).unwrap_or_default().into_iter().collect();
        for w in affected {
            ind.add_word_pairs(w, -1);
            let (syms, _) = &mut ind.words[w];
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && (syms[i], syms[i + 1]) == key {
                    out.push(new_sym);
                    i += 2;
                } else {
                    out.push(syms[i]);
                    i += 1;
                }
            }
            *syms = out;
            ind.add_word_pairs(w, 1);
        }
        debug_assert!(!ind.pair_counts.contains_key(&key));
        if in_vocab.insert(text.clone()) {
            vocab.push(text);
        }
    }
    WordPieceVocab::from_pieces(vocab)
}
