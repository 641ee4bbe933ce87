//! The constrained refinement loop.
//!
//! Each iteration runs the three classifiers of the policy in order
//! (delete, placeholders, fill). Depending on [`Mode`], the deletion and
//! placeholder predictions are passed through enforcement wrappers that
//! protect the constraint mask before the edit is applied.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::EditError;
use crate::policy::Policy;
use crate::state::{ConstraintList, DecodeState, Token};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;
pub const DEFAULT_MAX_LENGTH: usize = 200;

/// Decoding modes, each including everything enabled by the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Plain LevT: start from `<s> </s>`, constraints ignored.
    #[serde(rename = "baseline")]
    Baseline,
    /// Start from `<s> C1 .. Cm </s>`.
    #[serde(rename = "insert")]
    ConstraintInsertion,
    /// Additionally force "keep" on every masked position.
    #[serde(rename = "no-del")]
    NoDelete,
    /// Additionally force zero placeholders inside multi-token constraints.
    #[serde(rename = "no-ins")]
    NoInsert,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Baseline, Mode::ConstraintInsertion, Mode::NoDelete, Mode::NoInsert];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::ConstraintInsertion => "insert",
            Mode::NoDelete => "no-del",
            Mode::NoInsert => "no-ins",
        }
    }

    /// Row label in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Mode::Baseline => "Baseline LevT",
            Mode::ConstraintInsertion => "+ Constr. Ins.",
            Mode::NoDelete => "  + No Del.",
            Mode::NoInsert => "    + No Ins.",
        }
    }

    pub fn inserts_constraints(self) -> bool {
        self >= Mode::ConstraintInsertion
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "insert" | "constraint-insertion" => Ok(Mode::ConstraintInsertion),
            "no-del" | "no-delete" => Ok(Mode::NoDelete),
            "no-ins" | "no-insert" => Ok(Mode::NoInsert),
            other => Err(format!("unknown mode {other:?} (expected baseline, insert, no-del or no-ins)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeConfig {
    pub mode: Mode,
    pub max_iterations: usize,
    pub max_length: usize,
    /// Record every intermediate state in [`DecodeResult::trace`].
    pub keep_trace: bool,
    /// Drop `<s>`/`</s>` from [`DecodeResult::output`].
    pub strip_boundaries: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            mode: Mode::NoInsert,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_length: DEFAULT_MAX_LENGTH,
            keep_trace: false,
            strip_boundaries: true,
        }
    }
}

impl DecodeConfig {
    pub fn with_mode(mode: Mode) -> Self {
        DecodeConfig { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), EditError> {
        if self.max_iterations == 0 {
            return Err(EditError::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.max_length < 2 {
            return Err(EditError::InvalidConfig("max_length must leave room for <s> and </s>".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Fixpoint,
    IterationCap,
    LengthLimit,
}

#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub output: Vec<Token>,
    pub iterations_used: usize,
    pub terminated_by: Termination,
    /// `y^0, y^1, ..` when [`DecodeConfig::keep_trace`] is set.
    pub trace: Option<Vec<DecodeState>>,
    pub final_state: DecodeState,
}

impl DecodeResult {
    pub fn words(&self) -> Vec<String> {
        self.output.iter().map(|t| t.surface().to_string()).collect()
    }

    pub fn line(&self) -> String {
        self.output.iter().map(Token::surface).collect::<Vec<_>>().join(" ")
    }
}

/// `y^0 = <s> C1 .. Cm </s>`, every constraint token masked.
pub fn init_state(constraints: &ConstraintList, max_length: usize) -> Result<DecodeState, EditError> {
    let length = constraints.total_tokens() + 2;
    if length > max_length {
        return Err(EditError::LengthLimitExceeded { length, limit: max_length });
    }
    Ok(DecodeState::with_constraints(constraints.clone()))
}

/// Forces "keep" on every masked position.
pub fn enforce_no_delete(mut keep: Vec<bool>, state: &DecodeState) -> Result<Vec<bool>, EditError> {
    if keep.len() != state.len() {
        return Err(EditError::LengthMismatch { op: "enforce_no_delete", expected: state.len(), actual: keep.len() });
    }
    for (k, m) in keep.iter_mut().zip(state.mask()) {
        *k |= m.is_some();
    }
    Ok(keep)
}

/// Zeroes the count of every gap whose flanking tokens are consecutive
/// tokens of the same constraint.
pub fn enforce_no_insert_within(mut gap_counts: Vec<usize>, state: &DecodeState) -> Result<Vec<usize>, EditError> {
    let gaps = state.len().saturating_sub(1);
    if gap_counts.len() != gaps {
        return Err(EditError::LengthMismatch {
            op: "enforce_no_insert_within",
            expected: gaps,
            actual: gap_counts.len(),
        });
    }
    for (c, pair) in gap_counts.iter_mut().zip(state.mask().windows(2)) {
        let inside = match (pair[0], pair[1]) {
            (Some(left), Some(right)) => left.precedes(&right),
            _ => false,
        };
        *c *= usize::from(!inside);
    }
    Ok(gap_counts)
}

/// One refinement iteration. Returns the new state and whether its token
/// surfaces differ from the input.
pub fn step<P: Policy + ?Sized>(
    state: &DecodeState,
    source: &[String],
    policy: &mut P,
    config: &DecodeConfig,
) -> Result<(DecodeState, bool), EditError> {
    let mut keep = policy.delete(source, state);
    if config.mode >= Mode::NoDelete {
        keep = enforce_no_delete(keep, state)?;
    }
    let deleted = if keep.len() == state.len() && keep.iter().all(|&k| k) {
        Cow::Borrowed(state)
    } else {
        Cow::Owned(state.apply_deletion(&keep)?)
    };

    let mut counts = policy.placeholders(source, &deleted);
    if config.mode == Mode::NoInsert {
        counts = enforce_no_insert_within(counts, &deleted)?;
    }
    let inserted = if counts.len() + 1 == deleted.len() && counts.iter().all(|&c| c == 0) {
        deleted
    } else {
        Cow::Owned(deleted.apply_placeholder_insertion(&counts, config.max_length)?)
    };

    let fills = policy.fill(source, &inserted);
    let filled = if fills.is_empty() && inserted.placeholder_count() == 0 {
        inserted
    } else {
        Cow::Owned(inserted.fill_placeholders(&fills)?)
    };
    let changed = matches!(filled, Cow::Owned(_)) && filled.tokens() != state.tokens();
    Ok((filled.into_owned().with_iteration(state.iteration() + 1), changed))
}

/// Runs the refinement loop until the hypothesis stops changing or the
/// iteration cap is hit.
///
/// In [`Mode::Baseline`] the constraint list is never read. A step that
/// would exceed `max_length` ends decoding with
/// [`Termination::LengthLimit`], returning the last complete state.
pub fn decode<P: Policy + ?Sized>(
    source: &[String],
    constraints: &ConstraintList,
    policy: &mut P,
    config: &DecodeConfig,
) -> Result<DecodeResult, EditError> {
    config.validate()?;
    let mut state = if config.mode.inserts_constraints() {
        init_state(constraints, config.max_length)?
    } else {
        DecodeState::empty()
    };
    let mut trace = config.keep_trace.then(|| vec![state.clone()]);

    let terminated_by = loop {
        if state.iteration() >= config.max_iterations {
            break Termination::IterationCap;
        }
        match step(&state, source, policy, config) {
            Ok((next, changed)) => {
                state = next;
                if let Some(trace) = trace.as_mut() {
                    trace.push(state.clone());
                }
                if !changed {
                    break Termination::Fixpoint;
                }
            }
            Err(EditError::LengthLimitExceeded { .. }) => break Termination::LengthLimit,
            Err(e) => return Err(e),
        }
    };

    let output = if config.strip_boundaries { state.interior().to_vec() } else { state.tokens().to_vec() };
    Ok(DecodeResult { output, iterations_used: state.iteration(), terminated_by, trace, final_state: state })
}
