//! Metrics and the experiment harness.

mod bench;
mod bleu;
pub mod synthetic;

use std::fmt::Write as _;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::join_subwords;
use crate::error::EditError;

pub use bench::{bench_throughput, BenchItem, BenchOptions, BenchReport, ModeSpeed};
pub use bleu::{
    bootstrap_significance, corpus_bleu, corpus_bleu_with, sentence_stats, BleuStats, DEFAULT_BOOTSTRAP_SAMPLES,
    MIN_BOOTSTRAP_SAMPLES,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("{what}: {left} vs {right} sentences")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("bootstrap needs at least {min} samples, got {samples}")]
    TooFewSamples { samples: usize, min: usize },
    #[error("benchmark needs at least 3 repetitions, got {0}")]
    TooFewRepetitions(usize),
    #[error(transparent)]
    Decode(#[from] EditError),
}

/// Token level at which constraint phrases are looked up in outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchLevel {
    /// Tokens as given (`Pilot@@ projekt`).
    #[default]
    Subword,
    /// Both sides joined back into words first (`Pilotprojekt`).
    Word,
}

fn normalize<S: AsRef<str>>(tokens: &[S], level: MatchLevel) -> Vec<String> {
    match level {
        MatchLevel::Subword => tokens.iter().map(|t| t.as_ref().to_string()).collect(),
        MatchLevel::Word => join_subwords(tokens),
    }
}

fn occurs_at(output: &[String], phrase: &[String], start: usize) -> bool {
    output[start..start + phrase.len()] == *phrase
}

/// Claims, for each phrase in order, its leftmost occurrence that does not
/// overlap an earlier claim. `None` marks a phrase that was not generated.
pub fn match_constraints<S: AsRef<str>, T: AsRef<str>>(
    output: &[S],
    phrases: &[Vec<T>],
    level: MatchLevel,
) -> Vec<Option<Range<usize>>> {
    let output = normalize(output, level);
    let mut claimed: Vec<Range<usize>> = Vec::new();
    phrases
        .iter()
        .map(|p| {
            let phrase = normalize(p, level);
            if phrase.is_empty() || phrase.len() > output.len() {
                return None;
            }
            let hit = (0..=output.len() - phrase.len()).find(|&s| {
                let span = s..s + phrase.len();
                claimed.iter().all(|c| c.end <= span.start || span.end <= c.start) && occurs_at(&output, &phrase, s)
            })?;
            let span = hit..hit + phrase.len();
            claimed.push(span.clone());
            Some(span)
        })
        .collect()
}

fn check_pairing(outputs: usize, sets: usize) -> Result<(), EvalError> {
    if outputs != sets {
        return Err(EvalError::LengthMismatch { what: "outputs vs constraint sets", left: outputs, right: sets });
    }
    Ok(())
}

/// Generated constraints divided by given constraints; 1.0 when nothing was
/// given. Duplicate constraints each need their own occurrence.
pub fn term_usage<S: AsRef<str>, T: AsRef<str>>(
    outputs: &[Vec<S>],
    constraint_sets: &[Vec<Vec<T>>],
    level: MatchLevel,
) -> Result<f64, EvalError> {
    check_pairing(outputs.len(), constraint_sets.len())?;
    let (mut hit, mut total) = (0usize, 0usize);
    for (out, set) in outputs.iter().zip(constraint_sets) {
        total += set.len();
        hit += match_constraints(out, set, level).iter().flatten().count();
    }
    Ok(if total == 0 { 1.0 } else { hit as f64 / total as f64 })
}

/// Share of adjacent generated constraint pairs whose matched positions
/// keep the given order; `None` when no sentence has two generated
/// constraints.
pub fn order_rate<S: AsRef<str>, T: AsRef<str>>(
    outputs: &[Vec<S>],
    constraint_sets: &[Vec<Vec<T>>],
    level: MatchLevel,
) -> Result<Option<f64>, EvalError> {
    check_pairing(outputs.len(), constraint_sets.len())?;
    let (mut ordered, mut pairs) = (0usize, 0usize);
    for (out, set) in outputs.iter().zip(constraint_sets) {
        let starts: Vec<usize> = match_constraints(out, set, level).into_iter().flatten().map(|r| r.start).collect();
        for w in starts.windows(2) {
            pairs += 1;
            ordered += usize::from(w[0] <= w[1]);
        }
    }
    Ok((pairs > 0).then(|| ordered as f64 / pairs as f64))
}

const INSERTION_ATTEMPTS: usize = 64;

/// Inserts every constraint missing from `output` as a contiguous run at a
/// random gap, never inside an already generated constraint.
pub fn random_insertion<S: AsRef<str>, T: AsRef<str>>(output: &[S], phrases: &[Vec<T>], seed: u64) -> Vec<String> {
    let original: Vec<String> = output.iter().map(|t| t.as_ref().to_string()).collect();
    let matches = match_constraints(&original, phrases, MatchLevel::Subword);
    let missing: Vec<Vec<String>> = phrases
        .iter()
        .zip(&matches)
        .filter(|(_, m)| m.is_none())
        .map(|(p, _)| p.iter().map(|t| t.as_ref().to_string()).collect())
        .collect();
    if missing.is_empty() {
        return original;
    }
    let complete = |out: &[String]| match_constraints(out, phrases, MatchLevel::Subword).iter().all(Option::is_some);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempt = Vec::new();
    for _ in 0..INSERTION_ATTEMPTS {
        attempt = original.clone();
        let mut protected: Vec<Range<usize>> = matches.iter().flatten().cloned().collect();
        for phrase in &missing {
            let gaps: Vec<usize> =
                (0..=attempt.len()).filter(|&g| protected.iter().all(|r| g <= r.start || g >= r.end)).collect();
            let g = gaps[rng.gen_range(0..gaps.len())];
            attempt.splice(g..g, phrase.iter().cloned());
            for r in protected.iter_mut() {
                if r.start >= g {
                    *r = r.start + phrase.len()..r.end + phrase.len();
                }
            }
            protected.push(g..g + phrase.len());
        }
        if complete(&attempt) {
            return attempt;
        }
    }
    let mut appended = original;
    appended.extend(missing.into_iter().flatten());
    if complete(&appended) {
        appended
    } else {
        attempt
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term_usage: Option<f64>,
    pub bleu: f64,
    /// BLEU over the sentences that carry at least one constraint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu_constrained: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order_rate: Option<f64>,
    /// Sentences per second.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

impl EvalReport {
    /// BLEU and, when constraint sets are given, the constraint metrics.
    pub fn compute<S: AsRef<str>, T: AsRef<str>>(
        hyps: &[Vec<S>],
        refs: &[Vec<S>],
        constraint_sets: Option<&[Vec<Vec<T>>]>,
        level: MatchLevel,
        smooth: bool,
    ) -> Result<Self, EvalError> {
        let bleu = corpus_bleu_with(hyps, refs, smooth)?;
        let mut report = EvalReport { sentences: hyps.len(), bleu, ..Default::default() };
        if let Some(sets) = constraint_sets {
            report.term_usage = Some(term_usage(hyps, sets, level)?);
            report.order_rate = order_rate(hyps, sets, level)?;
            let picked: Vec<usize> = (0..sets.len()).filter(|&i| !sets[i].is_empty()).collect();
            if !picked.is_empty() {
                let h: Vec<&[S]> = picked.iter().map(|&i| hyps[i].as_slice()).collect();
                let r: Vec<&[S]> = picked.iter().map(|&i| refs[i].as_slice()).collect();
                let mut total = BleuStats::default();
                for (h, r) in h.iter().zip(&r) {
                    total += BleuStats::sentence(h, r);
                }
                report.bleu_constrained = Some(total.score(smooth));
            }
        }
        Ok(report)
    }
}

fn cell(value: Option<f64>, scale: f64) -> String {
    value.map_or_else(|| "-".to_string(), |v| format!("{:.2}", v * scale))
}

/// Plain-text table with the columns `Term% | BLEU Full | BLEU Constr. | Speed`.
pub fn render_table(rows: &[(String, EvalReport)]) -> String {
    let header = ["System", "Term%", "BLEU Full", "BLEU Constr.", "Speed (sent/sec)"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|(name, r)| {
            [
                name.clone(),
                cell(r.term_usage, 100.0),
                format!("{:.2}", r.bleu),
                cell(r.bleu_constrained, 1.0),
                cell(r.speed, 1.0),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let mut parts = Vec::new();
        for (i, c) in cells.iter().enumerate() {
            parts.push(if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) });
        }
        let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", rule.join("-+-"));
    for row in &body {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
