//! A seeded toy translation task for ablations and benchmarks.
//!
//! Each sentence has a reference that uses its terms, and a "belief": the
//! translation an imperfect model would produce on its own, where some terms
//! are replaced by synonyms. A [`NoisyOraclePolicy`] steering towards the
//! belief then plays the model.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BenchItem;
use crate::policy::{NoisyOraclePolicy, OraclePolicy};
use crate::state::{ConstraintList, Token};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub common_words: usize,
    pub terms: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_constraints: usize,
    /// Chance that the belief uses a synonym instead of a term.
    pub replace_prob: f64,
    /// Chance that a replaced term is still tolerated once present.
    pub accept_prob: f64,
    pub drop_prob: f64,
    pub extra_prob: f64,
    pub wrong_fill_prob: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            common_words: 300,
            terms: 400,
            min_len: 6,
            max_len: 18,
            max_constraints: 3,
            replace_prob: 0.3,
            accept_prob: 0.4,
            drop_prob: 0.02,
            extra_prob: 0.02,
            wrong_fill_prob: 0.03,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSentence {
    pub source: Vec<String>,
    pub reference: Vec<String>,
    pub belief: Vec<String>,
    pub constraints: Vec<Vec<String>>,
    /// Tokens of replaced terms that the model keeps once they appear.
    pub accepted: Vec<String>,
}

impl SyntheticSentence {
    pub fn constraint_list(&self) -> ConstraintList {
        ConstraintList::from_phrases(&self.constraints).expect("generated constraints are valid")
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub config: SyntheticConfig,
    pub sentences: Vec<SyntheticSentence>,
    /// Common words; the noise vocabulary of the model.
    pub vocab: Arc<[Token]>,
}

fn term_phrase(i: usize) -> Vec<String> {
    match i % 3 {
        0 => vec![format!("term{i}")],
        1 => vec![format!("term{i}@@"), format!("part{i}")],
        _ => vec![format!("term{i}"), format!("head{i}")],
    }
}

fn synonym_phrase(i: usize) -> Vec<String> {
    if i.is_multiple_of(2) {
        vec![format!("syn{i}")]
    } else {
        vec![format!("syn{i}@@"), format!("alt{i}")]
    }
}

impl SyntheticTask {
    pub fn generate(sentences: usize, seed: u64) -> Self {
        Self::generate_with(sentences, seed, SyntheticConfig::default())
    }

    pub fn generate_with(n: usize, seed: u64, config: SyntheticConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let common: Vec<String> = (0..config.common_words).map(|i| format!("w{i}")).collect();
        let mut sentences = Vec::with_capacity(n);
        for _ in 0..n {
            let len = rng.gen_range(config.min_len..=config.max_len);
            let mut chunks: Vec<(Vec<String>, Option<usize>)> =
                (0..len).map(|_| (vec![common[rng.gen_range(0..common.len())].clone()], None)).collect();
            let k = rng.gen_range(0..=config.max_constraints);
            let mut terms: Vec<usize> = rand::seq::index::sample(&mut rng, config.terms, k).into_vec();
            terms.shuffle(&mut rng);
            for &t in &terms {
                let at = rng.gen_range(0..=chunks.len());
                chunks.insert(at, (term_phrase(t), Some(t)));
            }

            let mut reference = Vec::new();
            let mut belief = Vec::new();
            let mut constraints = Vec::new();
            let mut accepted = Vec::new();
            for (words, term) in &chunks {
                reference.extend(words.iter().cloned());
                match term {
                    Some(t) => {
                        constraints.push(words.clone());
                        if rng.gen_bool(config.replace_prob) {
                            belief.extend(synonym_phrase(*t));
                            if rng.gen_bool(config.accept_prob) {
                                accepted.extend(words.iter().cloned());
                            }
                        } else {
                            belief.extend(words.iter().cloned());
                        }
                    }
                    None => belief.extend(words.iter().cloned()),
                }
            }
            let source = reference.iter().map(|w| format!("src_{w}")).collect();
            sentences.push(SyntheticSentence { source, reference, belief, constraints, accepted });
        }
        let vocab: Arc<[Token]> = common.iter().map(|w| Token::word(w)).collect();
        SyntheticTask { config, sentences, vocab }
    }

    /// The model for sentence `index`, seeded from `seed` and the index.
    pub fn policy(&self, index: usize, seed: u64) -> NoisyOraclePolicy {
        let s = &self.sentences[index];
        let c = &self.config;
        NoisyOraclePolicy::new(
            OraclePolicy::from_words(&s.belief),
            seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            self.vocab.clone(),
        )
        .with_noise(c.drop_prob, c.extra_prob, c.wrong_fill_prob)
        .with_accepted(s.accepted.iter().map(|w| Token::word(w)))
    }

    pub fn bench_items(&self) -> Vec<BenchItem> {
        self.sentences
            .iter()
            .map(|s| BenchItem { source: s.source.clone(), constraints: s.constraint_list() })
            .collect()
    }

    pub fn references(&self) -> Vec<Vec<String>> {
        self.sentences.iter().map(|s| s.reference.clone()).collect()
    }

    pub fn constraint_sets(&self) -> Vec<Vec<Vec<String>>> {
        self.sentences.iter().map(|s| s.constraints.clone()).collect()
    }
}
