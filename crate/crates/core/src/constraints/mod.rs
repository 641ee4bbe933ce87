//! Bilingual dictionaries and per-sentence constraint extraction.
//!
//! Dictionary entries are matched as contiguous, case-sensitive token runs
//! on the source sentence (and, when building a test set, on the reference
//! too). Overlapping matches are resolved leftmost-longest.

mod bpe;

pub use bpe::{join_subwords, segment_subwords, BpeCodes};

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::EditError;
use crate::state::ConstraintList;

/// Number of most frequent words removed from single-word dictionary
/// sources.
pub const DEFAULT_FREQ_TOP_K: usize = 500;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{origin}:{line}: {message}")]
    Malformed { origin: String, line: usize, message: String },
    #[error("{origin}:{line}: invalid constraint: {source}")]
    Constraint { origin: String, line: usize, source: EditError },
}

fn read_file(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DictEntry {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermDictionary {
    pub entries: Vec<DictEntry>,
    pub provenance: String,
}

impl TermDictionary {
    /// Parses `source phrase<TAB>target phrase` lines. Blank lines are
    /// skipped; anything else without exactly one tab and two non-empty
    /// sides is an error.
    pub fn parse(text: &str, provenance: &str) -> Result<Self, LoadError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |message: &str| LoadError::Malformed {
                origin: provenance.to_string(),
                line: i + 1,
                message: message.to_string(),
            };
            let mut sides = line.split('\t');
            let (Some(src), Some(tgt), None) = (sides.next(), sides.next(), sides.next()) else {
                return Err(malformed("expected exactly one tab"));
            };
            let source: Vec<String> = src.split_whitespace().map(String::from).collect();
            let target: Vec<String> = tgt.split_whitespace().map(String::from).collect();
            if source.is_empty() || target.is_empty() {
                return Err(malformed("empty phrase"));
            }
            entries.push(DictEntry { source, target });
        }
        Ok(TermDictionary { entries, provenance: provenance.to_string() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops entries whose source is a single word among the first `k` of
    /// `freq_list`. Multi-word sources are kept.
    pub fn filter_frequent<S: AsRef<str>>(&self, freq_list: &[S], k: usize) -> TermDictionary {
        let frequent: std::collections::HashSet<&str> = freq_list.iter().take(k).map(AsRef::as_ref).collect();
        let entries = self
            .entries
            .iter()
            .filter(|e| !(e.source.len() == 1 && frequent.contains(e.source[0].as_str())))
            .cloned()
            .collect();
        TermDictionary { entries, provenance: self.provenance.clone() }
    }

    /// Keeps `round(fraction * len)` entries chosen uniformly at random,
    /// in their original order.
    pub fn sample(&self, fraction: f64, seed: u64) -> TermDictionary {
        let n = self.entries.len();
        let keep = ((fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = sample(&mut rng, n, keep).into_vec();
        picked.sort_unstable();
        TermDictionary {
            entries: picked.into_iter().map(|i| self.entries[i].clone()).collect(),
            provenance: format!("{} (sampled {fraction})", self.provenance),
        }
    }
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<TermDictionary, LoadError> {
    let path = path.as_ref();
    TermDictionary::parse(&read_file(path)?, &path.display().to_string())
}

/// One word per line, most frequent first. Only the first field is used,
/// so `word<TAB>count` lists work as-is.
pub fn load_frequency_list(path: impl AsRef<Path>) -> Result<Vec<String>, LoadError> {
    let text = read_file(path.as_ref())?;
    Ok(text.lines().filter_map(|l| l.split_whitespace().next()).map(String::from).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchedTerm {
    /// Half-open token span in the source sentence.
    pub span: (usize, usize),
    pub source: Vec<String>,
    /// Target phrase, segmented when BPE codes were supplied.
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintSet {
    pub id: usize,
    /// Ordered by span start; spans never overlap.
    pub terms: Vec<MatchedTerm>,
}

impl ConstraintSet {
    pub fn constraints(&self) -> ConstraintList {
        ConstraintList::from_phrases(&self.phrases()).expect("dictionary phrases are non-empty")
    }

    pub fn phrases(&self) -> Vec<Vec<String>> {
        self.terms.iter().map(|t| t.target.clone()).collect()
    }

    pub fn to_record(&self) -> ConstraintRecord {
        ConstraintRecord {
            id: self.id,
            constraints: self
                .terms
                .iter()
                .map(|t| RecordTerm { source: t.source.clone(), target: t.target.clone() })
                .collect(),
        }
    }
}

/// Matches one dictionary against many sentences.
pub struct Extractor<'a> {
    dict: &'a TermDictionary,
    by_first: HashMap<&'a str, Vec<usize>>,
    codes: Option<&'a BpeCodes>,
}

impl<'a> Extractor<'a> {
    pub fn new(dict: &'a TermDictionary, codes: Option<&'a BpeCodes>) -> Self {
        let mut by_first: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, e) in dict.entries.iter().enumerate() {
            by_first.entry(e.source[0].as_str()).or_default().push(i);
        }
        Extractor { dict, by_first, codes }
    }

    pub fn extract<S: AsRef<str>>(&self, id: usize, source: &[S], reference: Option<&[S]>) -> ConstraintSet {
        let source: Vec<&str> = source.iter().map(AsRef::as_ref).collect();
        let reference: Option<Vec<&str>> = reference.map(|r| r.iter().map(AsRef::as_ref).collect());
        let mut terms = Vec::new();
        let mut i = 0;
        while i < source.len() {
            match self.longest_at(&source, i, reference.as_deref()) {
                Some(entry) => {
                    let end = i + entry.source.len();
                    let target = match self.codes {
                        Some(codes) => segment_subwords(&entry.target, codes),
                        None => entry.target.clone(),
                    };
                    terms.push(MatchedTerm { span: (i, end), source: entry.source.clone(), target });
                    i = end;
                }
                None => i += 1,
            }
        }
        ConstraintSet { id, terms }
    }

    /// Longest entry matching at `i`; among equally long ones, the first in
    /// dictionary order.
    fn longest_at(&self, source: &[&str], i: usize, reference: Option<&[&str]>) -> Option<&'a DictEntry> {
        let candidates = self.by_first.get(source[i])?;
        let mut best: Option<&DictEntry> = None;
        for &c in candidates {
            let e = &self.dict.entries[c];
            let len = e.source.len();
            if i + len > source.len() || !e.source.iter().zip(&source[i..i + len]).all(|(a, b)| a == b) {
                continue;
            }
            if let Some(r) = reference {
                if !contains_phrase(r, &e.target) {
                    continue;
                }
            }
            if best.is_none_or(|b| len > b.source.len()) {
                best = Some(e);
            }
        }
        best
    }
}

fn contains_phrase(haystack: &[&str], phrase: &[String]) -> bool {
    !phrase.is_empty()
        && haystack.len() >= phrase.len()
        && haystack.windows(phrase.len()).any(|w| w.iter().zip(phrase).all(|(a, b)| *a == b))
}

/// One-off extraction for a single sentence.
pub fn extract_constraints<S: AsRef<str>>(
    source: &[S],
    reference: Option<&[S]>,
    dict: &TermDictionary,
    codes: Option<&BpeCodes>,
) -> ConstraintSet {
    Extractor::new(dict, codes).extract(0, source, reference)
}

/// JSON Lines record: `{"id": 0, "constraints": [{"source": [..], "target": [..]}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub id: usize,
    pub constraints: Vec<RecordTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordTerm {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl ConstraintRecord {
    pub fn phrases(&self) -> Vec<Vec<String>> {
        self.constraints.iter().map(|c| c.target.clone()).collect()
    }

    pub fn constraint_list(&self) -> Result<ConstraintList, EditError> {
        ConstraintList::from_phrases(&self.phrases())
    }
}

pub fn write_constraints_jsonl<W: Write>(out: &mut W, records: &[ConstraintRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_constraints_jsonl(path: impl AsRef<Path>) -> Result<Vec<ConstraintRecord>, LoadError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let file = fs::File::open(path).map_err(|source| LoadError::Io { path: origin.clone(), source })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| LoadError::Io { path: origin.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConstraintRecord = serde_json::from_str(&line).map_err(|e| LoadError::Malformed {
            origin: origin.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        record.constraint_list().map_err(|source| LoadError::Constraint {
            origin: origin.clone(),
            line: i + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}
