//! Tokenizers and the shared code/natural-language vocabulary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const CSEP: u32 = 4;
pub const NSEP: u32 = 5;

pub const SPECIAL_TOKENS: [&str; 6] = ["<pad>", "<bos>", "<eos>", "<unk>", "[csep]", "[nsep]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextKind {
    Code,
    NaturalLanguage,
}

impl TextKind {
    pub fn tokenize(self, text: &str) -> Vec<String> {
        match self {
            TextKind::Code => tokenize_code(text),
            TextKind::NaturalLanguage => tokenize_nl(text),
        }
    }

    /// Tokens re-joined with single spaces; the form metrics compare on.
    pub fn canonical(self, text: &str) -> String {
        self.tokenize(text).join(" ")
    }
}

const CODE_OPERATORS: [&str; 17] = [
    "==", "!=", "<=", ">=", "&&", "||", "->", "::", "+=", "-=", "*=", "/=", "++", "--", "<<", ">>",
    "=>",
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits code on whitespace and punctuation, then breaks identifiers at
/// underscores and camelCase boundaries, and lowercases everything.
pub fn tokenize_code(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            split_identifier(&chars[start..i], &mut out);
        } else {
            if i + 1 < chars.len() {
                let pair: String = chars[i..i + 2].iter().collect();
                if CODE_OPERATORS.contains(&pair.as_str()) {
                    out.push(pair);
                    i += 2;
                    continue;
                }
            }
            out.push(c.to_lowercase().collect());
            i += 1;
        }
    }
    out
}

fn split_identifier(word: &[char], out: &mut Vec<String>) {
    let mut current = String::new();
    let flush = |current: &mut String, out: &mut Vec<String>| {
        if !current.is_empty() {
            out.push(current.to_lowercase());
            current.clear();
        }
    };
    for (i, &c) in word.iter().enumerate() {
        if c == '_' {
            flush(&mut current, out);
            continue;
        }
        if c.is_uppercase() && i > 0 {
            let prev = word[i - 1];
            let next_lower = word.get(i + 1).is_some_and(|n| n.is_lowercase());
            // fooBar -> foo|Bar, HTTPServer -> HTTP|Server
            if prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower) {
                flush(&mut current, out);
            }
        }
        current.push(c);
    }
    flush(&mut current, out);
}

/// Lowercases and splits on whitespace; punctuation becomes standalone tokens.
pub fn tokenize_nl(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_lowercase().collect());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(ids: Vec<u32>) -> Self {
        TokenSequence(ids)
    }
}

/// Shared vocabulary. Ids 0..6 are reserved for [`SPECIAL_TOKENS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Specials first, then tokens by descending frequency with lexicographic
    /// tie-break, truncated to `max_size` entries in total.
    pub fn build<I, T, S>(corpora: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < SPECIAL_TOKENS.len() {
            return Err(Error::VocabTooSmall(max_size));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for tokens in corpora {
            for tok in tokens {
                let tok = tok.as_ref();
                if SPECIAL_TOKENS.contains(&tok) {
                    continue;
                }
                *counts.entry(tok.to_string()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - SPECIAL_TOKENS.len());
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(t, _)| t));
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let id_to_token: Vec<String> = tokens.into_iter().collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> TokenSequence {
        TokenSequence(
            tokens
                .iter()
                .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
                .collect(),
        )
    }

    pub fn encode_text(&self, kind: TextKind, text: &str) -> TokenSequence {
        self.encode(&kind.tokenize(text))
    }

    pub fn decode(&self, seq: &TokenSequence) -> Vec<String> {
        seq.0
            .iter()
            .map(|&id| {
                self.token(id)
                    .unwrap_or(SPECIAL_TOKENS[UNK as usize])
                    .to_string()
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for tok in &self.id_to_token {
            writeln!(out, "{tok}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for line in BufReader::new(file).lines() {
            tokens.push(line.map_err(|e| Error::io(path, e))?);
        }
        let bad = |line: usize, reason: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            reason,
        };
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*special) {
                return Err(bad(i + 1, format!("expected special token {special}")));
            }
        }
        let vocab = Self::from_tokens(tokens);
        if vocab.token_to_id.len() != vocab.id_to_token.len() {
            return Err(bad(0, "vocabulary contains duplicate tokens".into()));
        }
        Ok(vocab)
    }
}
