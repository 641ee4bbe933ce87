//! Byte-pair-encoding segmentation with the `@@ ` joiner convention.
//!
//! Merge files use the usual format: an optional `#version` header, then
//! one merge per line, `left right`, in priority order. The end-of-word
//! marker is `</w>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::LoadError;
use crate::state::JOINER;

const END_OF_WORD: &str = "</w>";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeCodes {
    ranks: HashMap<(String, String), usize>,
}

impl BpeCodes {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, LoadError> {
        let mut ranks = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.starts_with("#version") {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => {
                    let rank = ranks.len();
                    ranks.entry((a.to_string(), b.to_string())).or_insert(rank);
                }
                _ => {
                    return Err(LoadError::Malformed {
                        origin: origin.to_string(),
                        line: i + 1,
                        message: "expected two symbols per merge".into(),
                    })
                }
            }
        }
        Ok(BpeCodes { ranks })
    }

    /// Learns `merges` merge operations from a word list, most frequent
    /// pair first (ties broken lexicographically).
    pub fn learn<S: AsRef<str>>(words: &[S], merges: usize) -> Self {
        let mut vocab: HashMap<Vec<String>, usize> = HashMap::new();
        for w in words {
            let symbols = initial_symbols(w.as_ref());
            if !symbols.is_empty() {
                *vocab.entry(symbols).or_default() += 1;
            }
        }
        let mut ranks = HashMap::new();
        for rank in 0..merges {
            let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
            for (symbols, &freq) in &vocab {
                for pair in symbols.windows(2) {
                    *pairs.entry((&pair[0], &pair[1])).or_default() += freq;
                }
            }
            let Some((best, _)) = pairs.into_iter().max_by(|(pa, fa), (pb, fb)| fa.cmp(fb).then_with(|| pb.cmp(pa)))
            else {
                break;
            };
            let best = (best.0.to_string(), best.1.to_string());
            vocab = vocab.into_iter().map(|(symbols, f)| (merge_pair(symbols, &best), f)).collect();
            ranks.insert(best, rank);
        }
        BpeCodes { ranks }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Splits one word into subwords; all but the last carry the joiner.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut symbols = initial_symbols(word);
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .filter_map(|p| self.ranks.get(&(p[0].clone(), p[1].clone())).map(|&r| (r, p)))
                .min_by_key(|(r, _)| *r)
                .map(|(_, p)| (p[0].clone(), p[1].clone()));
            match best {
                Some(pair) => symbols = merge_pair(symbols, &pair),
                None => break,
            }
        }
        if let Some(last) = symbols.last_mut() {
            if let Some(stripped) = last.strip_suffix(END_OF_WORD) {
                *last = stripped.to_string();
            }
        }
        if symbols.last().is_some_and(|s| s.is_empty()) {
            symbols.pop();
        }
        let n = symbols.len();
        symbols.into_iter().enumerate().map(|(i, s)| if i + 1 < n { s + JOINER } else { s }).collect()
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    let mut symbols: Vec<String> = word.chars().map(String::from).collect();
    if let Some(last) = symbols.last_mut() {
        last.push_str(END_OF_WORD);
    }
    symbols
}

fn merge_pair(symbols: Vec<String>, pair: &(String, String)) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(format!("{}{}", pair.0, pair.1));
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

/// Segments every word of a phrase.
pub fn segment_subwords<S: AsRef<str>>(phrase: &[S], codes: &BpeCodes) -> Vec<String> {
    phrase.iter().flat_map(|w| codes.segment_word(w.as_ref())).collect()
}

/// Glues `X@@ Y` back into `XY`.
pub fn join_subwords<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    let mut words = Vec::new();
    let mut pending = String::new();
    for t in tokens {
        let t = t.as_ref();
        match t.strip_suffix(JOINER) {
            Some(stem) => pending.push_str(stem),
            None => {
                pending.push_str(t);
                words.push(std::mem::take(&mut pending));
            }
        }
    }
    if !pending.is_empty() {
        words.push(pending);
    }
    words
}
