//! The three-classifier contract and the policies shipped with the crate.
//!
//! A trained LevT decoder answers three questions per iteration, each
//! conditioned on the source and the current hypothesis: which tokens to
//! keep, how many placeholders to open in each gap, and which token goes
//! into each placeholder. [`Policy`] is that contract; the implementations
//! here are stand-ins for the neural classifiers (reference-seeking oracle,
//! seeded random, adversarial, scripted).

mod align;
mod oracle;
mod random;

pub use align::{align_blocks, align_del_ins, EditScript};
pub use oracle::{NoisyOraclePolicy, OraclePolicy};
pub use random::RandomPolicy;

use crate::state::{DecodeState, Token};

/// Deletion, placeholder and token classifiers.
///
/// Output lengths must match the edit operations: `delete` returns one
/// flag per position (true at the boundaries), `placeholders` one count per
/// gap, `fill` one regular token per placeholder.
pub trait Policy {
    fn delete(&mut self, source: &[String], state: &DecodeState) -> Vec<bool>;
    fn placeholders(&mut self, source: &[String], state: &DecodeState) -> Vec<usize>;
    fn fill(&mut self, source: &[String], state: &DecodeState) -> Vec<Token>;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn delete(&mut self, source: &[String], state: &DecodeState) -> Vec<bool> {
        (**self).delete(source, state)
    }

    fn placeholders(&mut self, source: &[String], state: &DecodeState) -> Vec<usize> {
        (**self).placeholders(source, state)
    }

    fn fill(&mut self, source: &[String], state: &DecodeState) -> Vec<Token> {
        (**self).fill(source, state)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn delete(&mut self, source: &[String], state: &DecodeState) -> Vec<bool> {
        (**self).delete(source, state)
    }

    fn placeholders(&mut self, source: &[String], state: &DecodeState) -> Vec<usize> {
        (**self).placeholders(source, state)
    }

    fn fill(&mut self, source: &[String], state: &DecodeState) -> Vec<Token> {
        (**self).fill(source, state)
    }
}

/// Keeps everything, inserts nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPolicy;

impl Policy for IdentityPolicy {
    fn delete(&mut self, _source: &[String], state: &DecodeState) -> Vec<bool> {
        vec![true; state.len()]
    }

    fn placeholders(&mut self, _source: &[String], state: &DecodeState) -> Vec<usize> {
        vec![0; state.len().saturating_sub(1)]
    }

    fn fill(&mut self, _source: &[String], state: &DecodeState) -> Vec<Token> {
        (0..state.placeholder_count()).map(|_| Token::word("<unk>")).collect()
    }
}

/// Deletes every deletable token and never inserts.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdversarialPolicy;

impl Policy for AdversarialPolicy {
    fn delete(&mut self, _source: &[String], state: &DecodeState) -> Vec<bool> {
        state.tokens().iter().map(Token::is_boundary).collect()
    }

    fn placeholders(&mut self, _source: &[String], state: &DecodeState) -> Vec<usize> {
        vec![0; state.len().saturating_sub(1)]
    }

    fn fill(&mut self, _source: &[String], state: &DecodeState) -> Vec<Token> {
        (0..state.placeholder_count()).map(|_| Token::word("<unk>")).collect()
    }
}

/// Canned answers for one iteration; `None` falls back to identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptedStep {
    pub keep: Option<Vec<bool>>,
    pub counts: Option<Vec<usize>>,
    pub fills: Option<Vec<Token>>,
}

/// Replays a fixed list of per-iteration answers, then behaves like
/// [`IdentityPolicy`].
#[derive(Debug, Clone, Default)]
pub struct ScriptedPolicy {
    steps: Vec<ScriptedStep>,
    at: usize,
}

impl ScriptedPolicy {
    pub fn new(steps: Vec<ScriptedStep>) -> Self {
        ScriptedPolicy { steps, at: 0 }
    }

    fn current(&self) -> Option<&ScriptedStep> {
        self.steps.get(self.at)
    }
}

impl Policy for ScriptedPolicy {
    fn delete(&mut self, source: &[String], state: &DecodeState) -> Vec<bool> {
        match self.current().and_then(|s| s.keep.clone()) {
            Some(keep) => keep,
            None => IdentityPolicy.delete(source, state),
        }
    }

    fn placeholders(&mut self, source: &[String], state: &DecodeState) -> Vec<usize> {
        match self.current().and_then(|s| s.counts.clone()) {
            Some(counts) => counts,
            None => IdentityPolicy.placeholders(source, state),
        }
    }

    fn fill(&mut self, source: &[String], state: &DecodeState) -> Vec<Token> {
        let fills = match self.current().and_then(|s| s.fills.clone()) {
            Some(fills) => fills,
            None => IdentityPolicy.fill(source, state),
        };
        self.at += 1;
        fills
    }
}
