use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Policy;
use crate::state::{DecodeState, Token};

pub const DEFAULT_KEEP_PROB: f64 = 0.9;
pub const DEFAULT_INSERT_PROB: f64 = 0.05;
pub const DEFAULT_MAX_PER_GAP: usize = 3;

/// Seeded random classifiers.
///
/// Each deletable token is kept with `keep_prob`. Each gap opens
/// `1..=max_per_gap` placeholders with probability `insert_prob`; on top of
/// that, while the hypothesis is shorter than the source, the missing
/// length is spread over random gaps. Hypotheses therefore hover around the
/// source length whatever the starting point. Fills are uniform over the
/// vocabulary.
///
/// One instance carries one generator; create a fresh instance per decode
/// for reproducible results.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    vocab: Arc<[Token]>,
    keep_prob: f64,
    insert_prob: f64,
    max_per_gap: usize,
}

impl RandomPolicy {
    pub fn new(seed: u64, vocab: impl Into<Arc<[Token]>>) -> Self {
        let vocab = vocab.into();
        assert!(!vocab.is_empty(), "random policy needs a non-empty vocabulary");
        RandomPolicy {
            rng: ChaCha8Rng::seed_from_u64(seed),
            vocab,
            keep_prob: DEFAULT_KEEP_PROB,
            insert_prob: DEFAULT_INSERT_PROB,
            max_per_gap: DEFAULT_MAX_PER_GAP,
        }
    }

    pub fn with_probabilities(mut self, keep_prob: f64, insert_prob: f64) -> Self {
        self.keep_prob = keep_prob.clamp(0.0, 1.0);
        self.insert_prob = insert_prob.clamp(0.0, 1.0);
        self
    }

    pub fn with_max_per_gap(mut self, max_per_gap: usize) -> Self {
        self.max_per_gap = max_per_gap.max(1);
        self
    }
}

impl Policy for RandomPolicy {
    fn delete(&mut self, _source: &[String], state: &DecodeState) -> Vec<bool> {
        state.tokens().iter().map(|t| t.is_boundary() || self.rng.gen_bool(self.keep_prob)).collect()
    }

    fn placeholders(&mut self, source: &[String], state: &DecodeState) -> Vec<usize> {
        let gaps = state.len().saturating_sub(1);
        let mut counts: Vec<usize> = (0..gaps)
            .map(|_| if self.rng.gen_bool(self.insert_prob) { self.rng.gen_range(1..=self.max_per_gap) } else { 0 })
            .collect();
        if gaps > 0 {
            let deficit = source.len().saturating_sub(state.len() - 2);
            for _ in 0..deficit {
                counts[self.rng.gen_range(0..gaps)] += 1;
            }
        }
        counts
    }

    fn fill(&mut self, _source: &[String], state: &DecodeState) -> Vec<Token> {
        (0..state.placeholder_count()).map(|_| self.vocab[self.rng.gen_range(0..self.vocab.len())]).collect()
    }
}
