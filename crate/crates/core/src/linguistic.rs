//! Question tokenization: a corpus-built subword vocabulary (frequent whole
//! words over single-character fallbacks) with greedy longest-match
//! segmentation.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const APP: &str = "<APP>";
pub const GEO: &str = "<GEO>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
pub const APP_ID: usize = 4;
pub const GEO_ID: usize = 5;

/// Special tokens in id order.
pub const SPECIAL_TOKENS: [&str; 6] = [PAD, UNK, CLS, SEP, APP, GEO];

/// Smallest permitted vocabulary: the special tokens plus `a`..`z`.
pub const MIN_VOCAB_SIZE: usize = SPECIAL_TOKENS.len() + 26;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    longest: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedQuestion {
    pub token_ids: Vec<usize>,
    pub source: String,
}

impl TokenizedQuestion {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Lowercased words of `text`, split on whitespace and ASCII punctuation.
/// Punctuation is dropped.
pub fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

impl TokenVocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(Error::Validation(format!("token vocabulary must start with {s} at id {i}")));
            }
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Validation(format!("empty token at id {i}")));
            }
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate token {t:?}")));
            }
        }
        let longest = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(1);
        Ok(TokenVocabulary { tokens, ids, longest })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> usize {
        PAD_ID
    }

    pub fn unk_id(&self) -> usize {
        UNK_ID
    }

    pub fn cls_id(&self) -> usize {
        CLS_ID
    }

    pub fn sep_id(&self) -> usize {
        SEP_ID
    }

    pub fn app_id(&self) -> usize {
        APP_ID
    }

    pub fn geo_id(&self) -> usize {
        GEO_ID
    }

    /// One token per line; the line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }
}

/// Builds a vocabulary of at most `max_size` tokens: the special tokens,
/// `a`..`z`, any other characters seen in the corpus (sorted), then whole
/// words by descending frequency with alphabetical tie-break.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[S], max_size: usize) -> Result<TokenVocabulary> {
    if max_size < MIN_VOCAB_SIZE {
        return Err(Error::Parameter(format!(
            "max_size {max_size} is below the minimum of {MIN_VOCAB_SIZE} (special tokens + a-z)"
        )));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut chars: BTreeSet<char> = BTreeSet::new();
    for q in corpus {
        for w in split_words(q.as_ref()) {
            chars.extend(w.chars().filter(|c| !c.is_ascii_lowercase()));
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(('a'..='z').map(String::from));
    tokens.extend(chars.into_iter().map(String::from));
    tokens.truncate(max_size);

    let mut words: Vec<(String, usize)> = counts.into_iter().filter(|(w, _)| w.chars().count() > 1).collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let room = max_size - tokens.len();
    tokens.extend(words.into_iter().take(room).map(|(w, _)| w));
    TokenVocabulary::from_tokens(tokens)
}

/// Greedy longest-match segmentation of each word. Characters with no
/// matching token become `[UNK]`; a question with no words is `[UNK]`.
pub fn tokenize(q: &str, vocab: &TokenVocabulary) -> TokenizedQuestion {
    let mut ids = Vec::new();
    for word in split_words(q) {
        let chars: Vec<char> = word.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let mut matched = None;
            let max_len = vocab.longest.min(chars.len() - i);
            for len in (1..=max_len).rev() {
                let piece: String = chars[i..i + len].iter().collect();
                if let Some(id) = vocab.id(&piece) {
                    matched = Some((id, len));
                    break;
                }
            }
            match matched {
                Some((id, len)) => {
                    ids.push(id);
                    i += len;
                }
                None => {
                    ids.push(vocab.unk_id());
                    i += 1;
                }
            }
        }
    }
    if ids.is_empty() {
        ids.push(vocab.unk_id());
    }
    TokenizedQuestion { token_ids: ids, source: q.to_string() }
}
