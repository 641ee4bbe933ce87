use std::collections::HashSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::align::{align_blocks, EditScript};
use super::Policy;
use crate::state::{DecodeState, Token};

/// Steers the hypothesis towards a fixed reference.
///
/// Every call re-aligns the current interior (placeholders ignored) against
/// the reference, so the answers stay consistent with whatever the
/// enforcement wrappers did to earlier predictions. Runs of consecutive
/// tokens from the same constraint are aligned as one block, so an intact
/// constraint is either matched contiguously or left alone.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    reference: Vec<Token>,
}

/// Alignment of the non-placeholder interior of a state.
struct Plan {
    /// State positions of the aligned tokens.
    positions: Vec<usize>,
    /// `kept[k]`: whether `positions[k]` survives the script.
    kept: Vec<bool>,
    script: EditScript<Token>,
}

impl OraclePolicy {
    pub fn new(reference: Vec<Token>) -> Self {
        OraclePolicy { reference }
    }

    pub fn from_words<S: AsRef<str>>(reference: &[S]) -> Self {
        Self::new(reference.iter().map(|w| Token::word(w.as_ref())).collect())
    }

    pub fn reference(&self) -> &[Token] {
        &self.reference
    }

    fn plan(&self, state: &DecodeState) -> Plan {
        let tokens = state.tokens();
        let mask = state.mask();
        let n = tokens.len();
        let positions: Vec<usize> = (1..n.saturating_sub(1)).filter(|&i| !tokens[i].is_placeholder()).collect();
        let current: Vec<Token> = positions.iter().map(|&i| tokens[i]).collect();

        let mut blocks: Vec<usize> = Vec::with_capacity(positions.len());
        for (k, &p) in positions.iter().enumerate() {
            let joins = k > 0
                && matches!(
                    (mask[positions[k - 1]], mask[p]),
                    (Some(a), Some(b)) if a.precedes(&b)
                );
            match blocks.last_mut() {
                Some(len) if joins => *len += 1,
                _ => blocks.push(1),
            }
        }

        let script = align_blocks(&current, &blocks, &self.reference);
        let mut kept = vec![true; positions.len()];
        for &d in &script.deletions {
            kept[d] = false;
        }
        Plan { positions, kept, script }
    }

    /// Planned token for each placeholder, left to right; `None` where the
    /// state has more placeholders in a gap than the script asks for.
    fn fill_plan(&self, state: &DecodeState) -> Vec<Option<Token>> {
        let plan = self.plan(state);
        let mut gap = 0;
        let mut used = vec![0usize; plan.script.insertions.len()];
        let mut next_aligned = 0;
        let mut out = Vec::with_capacity(state.placeholder_count());
        for (i, t) in state.tokens().iter().enumerate() {
            if t.is_placeholder() {
                let ins = &plan.script.insertions[gap];
                out.push(ins.get(used[gap]).cloned());
                used[gap] += 1;
            } else if plan.positions.get(next_aligned) == Some(&i) {
                if plan.kept[next_aligned] {
                    gap += 1;
                }
                next_aligned += 1;
            }
        }
        out
    }
}

impl Policy for OraclePolicy {
    fn delete(&mut self, _source: &[String], state: &DecodeState) -> Vec<bool> {
        let plan = self.plan(state);
        let mut keep = vec![true; state.len()];
        for (&p, &k) in plan.positions.iter().zip(&plan.kept) {
            keep[p] = k;
        }
        keep
    }

    fn placeholders(&mut self, _source: &[String], state: &DecodeState) -> Vec<usize> {
        let plan = self.plan(state);
        let n = state.len();
        let mut counts = vec![0; n.saturating_sub(1)];
        let kept_positions: Vec<usize> =
            plan.positions.iter().zip(&plan.kept).filter(|(_, &k)| k).map(|(&p, _)| p).collect();
        for (g, ins) in plan.script.insertions.iter().enumerate() {
            if ins.is_empty() {
                continue;
            }
            // Right before the g-th kept token, or right before </s>.
            let gap = match kept_positions.get(g) {
                Some(&p) => p - 1,
                None => n - 2,
            };
            counts[gap] += ins.len();
        }
        counts
    }

    fn fill(&mut self, _source: &[String], state: &DecodeState) -> Vec<Token> {
        let fallback = self.reference.first().cloned().unwrap_or_else(|| Token::word("<unk>"));
        self.fill_plan(state).into_iter().map(|t| t.unwrap_or(fallback)).collect()
    }
}

/// An imperfect model: an [`OraclePolicy`] towards the model's own
/// preferred translation, plus seeded noise.
///
/// * tokens in the `accepted` set are never deleted, even when the belief
///   reference does not contain them (the model tolerating a supplied term),
/// * every kept interior token is dropped with probability `drop_prob`,
/// * every gap receives one extra placeholder with probability `extra_prob`,
/// * every fill is replaced by a random vocabulary token with probability
///   `wrong_fill_prob`.
#[derive(Debug, Clone)]
pub struct NoisyOraclePolicy {
    oracle: OraclePolicy,
    accepted: HashSet<Token>,
    rng: ChaCha8Rng,
    vocab: Arc<[Token]>,
    drop_prob: f64,
    extra_prob: f64,
    wrong_fill_prob: f64,
}

impl NoisyOraclePolicy {
    pub fn new(oracle: OraclePolicy, seed: u64, vocab: impl Into<Arc<[Token]>>) -> Self {
        let vocab = vocab.into();
        assert!(!vocab.is_empty(), "noisy oracle needs a non-empty vocabulary");
        NoisyOraclePolicy {
            oracle,
            accepted: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            vocab,
            drop_prob: 0.0,
            extra_prob: 0.0,
            wrong_fill_prob: 0.0,
        }
    }

    pub fn with_noise(mut self, drop_prob: f64, extra_prob: f64, wrong_fill_prob: f64) -> Self {
        self.drop_prob = drop_prob;
        self.extra_prob = extra_prob;
        self.wrong_fill_prob = wrong_fill_prob;
        self
    }

    pub fn with_accepted(mut self, accepted: impl IntoIterator<Item = Token>) -> Self {
        self.accepted = accepted.into_iter().collect();
        self
    }

    fn random_token(&mut self) -> Token {
        self.vocab[self.rng.gen_range(0..self.vocab.len())]
    }
}

impl Policy for NoisyOraclePolicy {
    fn delete(&mut self, source: &[String], state: &DecodeState) -> Vec<bool> {
        let mut keep = self.oracle.delete(source, state);
        let tokens = state.tokens();
        for (k, t) in keep.iter_mut().zip(tokens) {
            if !*k && self.accepted.contains(t) {
                *k = true;
            }
        }
        let n = keep.len();
        for k in keep.iter_mut().take(n.saturating_sub(1)).skip(1) {
            if *k && self.rng.gen_bool(self.drop_prob) {
                *k = false;
            }
        }
        keep
    }

    fn placeholders(&mut self, source: &[String], state: &DecodeState) -> Vec<usize> {
        let mut counts = self.oracle.placeholders(source, state);
        for c in counts.iter_mut() {
            if self.rng.gen_bool(self.extra_prob) {
                *c += 1;
            }
        }
        counts
    }

    fn fill(&mut self, _source: &[String], state: &DecodeState) -> Vec<Token> {
        let plan = self.oracle.fill_plan(state);
        plan.into_iter()
            .map(|planned| match planned {
                Some(t) if !self.rng.gen_bool(self.wrong_fill_prob) => t,
                _ => self.random_token(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{decode, DecodeConfig, Mode, Termination};
    use crate::state::ConstraintList;
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn converged_state_is_a_fixpoint() {
        let mut p = OraclePolicy::from_words(&words("a b c"));
        let s = DecodeState::from_words(&words("a b c"));
        assert_eq!(p.delete(&[], &s), vec![true; 5]);
        assert_eq!(p.placeholders(&[], &s), vec![0; 4]);
        assert!(p.fill(&[], &s).is_empty());
    }

    #[test]
    fn unconstrained_decode_reaches_reference() {
        let reference = words("In Nevada ist ein Pilot@@ projekt abgeschlossen");
        let mut p = OraclePolicy::from_words(&reference);
        let r = decode(&[], &ConstraintList::default(), &mut p, &DecodeConfig::with_mode(Mode::Baseline)).unwrap();
        assert_eq!(r.words(), reference);
        assert_eq!(r.terminated_by, Termination::Fixpoint);
        assert_eq!(r.iterations_used, 2);
    }

    #[test]
    fn placeholders_go_before_kept_token() {
        // x must go; y is inserted where x was, right before b.
        let mut p = OraclePolicy::from_words(&words("a y b"));
        let s = DecodeState::from_words(&words("a x b"));
        let keep = p.delete(&[], &s);
        assert_eq!(keep, [true, true, false, true, true]);
        let s = s.apply_deletion(&keep).unwrap();
        assert_eq!(p.placeholders(&[], &s), [0, 1, 0]);
    }

    #[test]
    fn forced_keep_still_converges_around_constraint() {
        let reference = words("a b c");
        let c = ConstraintList::from_phrases(&[["z"]]).unwrap();
        let mut p = OraclePolicy::from_words(&reference);
        let r = decode(&[], &c, &mut p, &DecodeConfig::with_mode(Mode::NoInsert)).unwrap();
        assert_eq!(r.terminated_by, Termination::Fixpoint);
        let out = r.words();
        assert!(out.contains(&"z".to_string()));
        let rest: Vec<_> = out.iter().filter(|w| *w != "z").cloned().collect();
        assert_eq!(rest, reference);
    }

    #[test]
    fn accepted_tokens_survive_noisy_deletion() {
        let vocab: Vec<Token> = vec![Token::word("q")];
        let mut p = NoisyOraclePolicy::new(OraclePolicy::from_words(&words("a b")), 1, vocab)
            .with_accepted([Token::word("term")]);
        let s = DecodeState::from_words(&words("term a"));
        assert_eq!(p.delete(&[], &s), [true, true, true, true]);
    }

    fn arb_reference() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[a-e]", 1..=20)
    }

    proptest! {
        #[test]
        fn oracle_converges_unconstrained(reference in arb_reference()) {
            let mut p = OraclePolicy::from_words(&reference);
            let r = decode(&[], &ConstraintList::default(), &mut p, &DecodeConfig::with_mode(Mode::Baseline)).unwrap();
            prop_assert_eq!(r.terminated_by, Termination::Fixpoint);
            prop_assert_eq!(r.words(), reference);
        }

        #[test]
        fn consistent_constraints_do_not_perturb_convergence(
            reference in arb_reference(),
            cuts in prop::collection::vec((0usize..20, 1usize..4), 0..4),
        ) {
            // Non-overlapping phrases of the reference, in reference order.
            let mut spans: Vec<(usize, usize)> = Vec::new();
            let mut sorted = cuts.clone();
            sorted.sort();
            for (start, len) in sorted {
                let end = (start + len).min(reference.len());
                if start < end && spans.last().is_none_or(|&(_, e)| e <= start) {
                    spans.push((start, end));
                }
            }
            let phrases: Vec<Vec<String>> = spans.iter().map(|&(s, e)| reference[s..e].to_vec()).collect();
            let constraints = ConstraintList::from_phrases(&phrases).unwrap();
            for mode in [Mode::ConstraintInsertion, Mode::NoDelete, Mode::NoInsert] {
                let mut p = OraclePolicy::from_words(&reference);
                let r = decode(&[], &constraints, &mut p, &DecodeConfig::with_mode(mode)).unwrap();
                prop_assert_eq!(r.terminated_by, Termination::Fixpoint);
                prop_assert_eq!(&r.words(), &reference);
            }
        }
    }
}
