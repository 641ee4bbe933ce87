//! Decode state and the three primitive edit operations.
//!
//! A [`DecodeState`] is the current hypothesis `<s> y_1 .. y_n </s>` plus a
//! per-position constraint mask. Every edit returns a fresh state; the mask
//! is carried along by filtering (deletion) or shifting (insertion), so a
//! masked position always points at the constraint token it was created for.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::Deref;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::EditError;

/// Subword joiner suffix: a token ending in `@@` glues to its successor.
pub const JOINER: &str = "@@";

pub const BOS_SURFACE: &str = "<s>";
pub const EOS_SURFACE: &str = "</s>";
pub const PLACEHOLDER_SURFACE: &str = "[PLH]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Regular,
    Bos,
    Eos,
    Placeholder,
}

/// An interned surface string. Surfaces live for the rest of the process,
/// so copies and comparisons are pointer-sized.
#[derive(Clone, Copy)]
pub struct Symbol(&'static str);

fn interner() -> &'static RwLock<HashSet<&'static str>> {
    static INTERNER: OnceLock<RwLock<HashSet<&'static str>>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

impl Symbol {
    pub fn intern(surface: &str) -> Self {
        if let Some(&s) = interner().read().unwrap_or_else(|e| e.into_inner()).get(surface) {
            return Symbol(s);
        }
        let mut set = interner().write().unwrap_or_else(|e| e.into_inner());
        if let Some(&s) = set.get(surface) {
            return Symbol(s);
        }
        let leaked: &'static str = Box::leak(surface.into());
        set.insert(leaked);
        Symbol(leaked)
    }

    pub fn as_str(self) -> &'static str {
        self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self.0, f)
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

/// A target-side token. Regular tokens carry their surface (possibly a
/// subword ending in [`JOINER`]); the special symbols carry none.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Bos,
    Eos,
    Placeholder,
    Word(Symbol),
}

impl Token {
    pub fn word(surface: &str) -> Self {
        Token::Word(Symbol::intern(surface))
    }

    /// Maps the reserved surfaces back onto their special kinds.
    pub fn parse(surface: &str) -> Self {
        match surface {
            BOS_SURFACE => Token::Bos,
            EOS_SURFACE => Token::Eos,
            PLACEHOLDER_SURFACE => Token::Placeholder,
            s => Token::word(s),
        }
    }

    pub fn kind(&self) -> TokenKind {
        match self {
            Token::Bos => TokenKind::Bos,
            Token::Eos => TokenKind::Eos,
            Token::Placeholder => TokenKind::Placeholder,
            Token::Word(_) => TokenKind::Regular,
        }
    }

    pub fn surface(&self) -> &'static str {
        match self {
            Token::Bos => BOS_SURFACE,
            Token::Eos => EOS_SURFACE,
            Token::Placeholder => PLACEHOLDER_SURFACE,
            Token::Word(s) => s.as_str(),
        }
    }

    pub fn is_regular(&self) -> bool {
        matches!(self, Token::Word(_))
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Token::Bos | Token::Eos)
    }

    pub fn is_placeholder(&self) -> bool {
        matches!(self, Token::Placeholder)
    }

    pub fn has_joiner(&self) -> bool {
        self.is_regular() && self.surface().ends_with(JOINER)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

impl From<&str> for Token {
    fn from(s: &str) -> Self {
        Token::word(s)
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.surface())
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Token::parse(&s))
    }
}

/// Parses a whitespace-tokenized line into regular tokens.
pub fn words(line: &str) -> Vec<Token> {
    line.split_whitespace().map(Token::word).collect()
}

/// An ordered, non-empty target phrase that has to show up in the output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    id: usize,
    tokens: Arc<[Token]>,
}

impl Constraint {
    pub fn new(id: usize, tokens: Vec<Token>) -> Result<Self, EditError> {
        if tokens.is_empty() {
            return Err(EditError::InvalidConstraint(format!("constraint {id} is empty")));
        }
        if let Some(bad) = tokens.iter().find(|t| !t.is_regular()) {
            return Err(EditError::InvalidConstraint(format!("constraint {id} contains special token {bad}")));
        }
        Ok(Constraint { id, tokens: tokens.into() })
    }

    pub fn from_words<S: AsRef<str>>(id: usize, words: &[S]) -> Result<Self, EditError> {
        Self::new(id, words.iter().map(|w| Token::word(w.as_ref())).collect())
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface().to_string()).collect()
    }
}

/// The constraints of one sentence, with ids `0..m` in list order.
///
/// Cheap to clone; every state derived from the same initial hypothesis
/// shares one list.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstraintList(Option<Arc<[Constraint]>>);

impl ConstraintList {
    pub fn new(constraints: Vec<Constraint>) -> Result<Self, EditError> {
        for (i, c) in constraints.iter().enumerate() {
            if c.id != i {
                return Err(EditError::InvalidConstraint(format!("constraint at index {i} has id {}", c.id)));
            }
        }
        if constraints.is_empty() {
            Ok(ConstraintList(None))
        } else {
            Ok(ConstraintList(Some(constraints.into())))
        }
    }

    /// Builds a list from plain phrases, numbering them in order.
    pub fn from_phrases<P, S>(phrases: &[P]) -> Result<Self, EditError>
    where
        P: AsRef<[S]>,
        S: AsRef<str>,
    {
        let constraints = phrases
            .iter()
            .enumerate()
            .map(|(i, p)| Constraint::from_words(i, p.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(constraints)
    }

    pub fn total_tokens(&self) -> usize {
        self.iter().map(Constraint::len).sum()
    }

    pub fn phrases(&self) -> Vec<Vec<String>> {
        self.iter().map(Constraint::surfaces).collect()
    }
}

impl Deref for ConstraintList {
    type Target = [Constraint];

    fn deref(&self) -> &[Constraint] {
        match &self.0 {
            Some(list) => list,
            None => &[],
        }
    }
}

/// Marks a position as token `offset` of constraint `constraint`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskEntry {
    pub constraint: u32,
    pub offset: u32,
}

impl MaskEntry {
    pub fn new(constraint: usize, offset: usize) -> Self {
        MaskEntry {
            constraint: u32::try_from(constraint).expect("constraint id fits in u32"),
            offset: u32::try_from(offset).expect("constraint offset fits in u32"),
        }
    }

    pub fn constraint(&self) -> usize {
        self.constraint as usize
    }

    pub fn offset(&self) -> usize {
        self.offset as usize
    }

    /// True when `next` is the token directly following `self` inside the
    /// same constraint.
    pub fn precedes(&self, next: &MaskEntry) -> bool {
        self.constraint == next.constraint && self.offset + 1 == next.offset
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeState {
    tokens: Vec<Token>,
    mask: Vec<Option<MaskEntry>>,
    iteration: usize,
    constraints: ConstraintList,
}

impl DecodeState {
    /// `<s> </s>`, the unconstrained starting point.
    pub fn empty() -> Self {
        DecodeState {
            tokens: vec![Token::Bos, Token::Eos],
            mask: vec![None, None],
            iteration: 0,
            constraints: ConstraintList::default(),
        }
    }

    /// `<s> C1 .. Cm </s>` with every constraint token masked.
    pub fn with_constraints(constraints: ConstraintList) -> Self {
        let len = constraints.total_tokens() + 2;
        let mut tokens = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        tokens.push(Token::Bos);
        mask.push(None);
        for c in constraints.iter() {
            for (offset, t) in c.tokens().iter().enumerate() {
                tokens.push(*t);
                mask.push(Some(MaskEntry::new(c.id(), offset)));
            }
        }
        tokens.push(Token::Eos);
        mask.push(None);
        DecodeState { tokens, mask, iteration: 0, constraints }
    }

    /// Assembles a state without checking any invariant; pair with
    /// [`validate_state`] when the parts come from outside.
    pub fn from_parts(
        tokens: Vec<Token>,
        mask: Vec<Option<MaskEntry>>,
        iteration: usize,
        constraints: ConstraintList,
    ) -> Self {
        DecodeState { tokens, mask, iteration, constraints }
    }

    /// A state over plain regular tokens, wrapped in boundaries, no mask.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let mut tokens = Vec::with_capacity(words.len() + 2);
        tokens.push(Token::Bos);
        tokens.extend(words.iter().map(|w| Token::word(w.as_ref())));
        tokens.push(Token::Eos);
        let mask = vec![None; tokens.len()];
        DecodeState { tokens, mask, iteration: 0, constraints: ConstraintList::default() }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Tokens between the boundary symbols.
    pub fn interior(&self) -> &[Token] {
        let n = self.tokens.len();
        if n < 2 {
            &self.tokens[..0]
        } else {
            &self.tokens[1..n - 1]
        }
    }

    pub fn mask(&self) -> &[Option<MaskEntry>] {
        &self.mask
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn constraints(&self) -> &ConstraintList {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(Token::surface).collect()
    }

    pub fn placeholder_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.is_placeholder()).count()
    }

    pub fn masked_positions(&self) -> impl Iterator<Item = (usize, MaskEntry)> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, m)| m.map(|m| (i, m)))
    }

    /// Start position of every constraint that is still present as one
    /// unbroken masked run; `None` for constraints that lost a token or had
    /// something inserted inside them.
    pub fn intact_spans(&self) -> Vec<Option<usize>> {
        let mut spans = vec![None; self.constraints.len()];
        for (i, entry) in self.masked_positions() {
            if entry.offset != 0 {
                continue;
            }
            let Some(c) = self.constraints.get(entry.constraint()) else {
                continue;
            };
            let intact =
                (0..c.len()).all(|k| self.mask.get(i + k).copied().flatten() == Some(MaskEntry::new(c.id(), k)));
            if intact {
                spans[c.id()] = Some(i);
            }
        }
        spans
    }

    pub(crate) fn with_iteration(mut self, iteration: usize) -> Self {
        self.iteration = iteration;
        self
    }

    /// Keeps exactly the positions where `keep` is true; surviving mask
    /// entries move with their tokens.
    pub fn apply_deletion(&self, keep: &[bool]) -> Result<DecodeState, EditError> {
        if keep.len() != self.tokens.len() {
            return Err(EditError::LengthMismatch {
                op: "apply_deletion",
                expected: self.tokens.len(),
                actual: keep.len(),
            });
        }
        if let Some(position) = self.tokens.iter().zip(keep).position(|(t, &k)| t.is_boundary() && !k) {
            return Err(EditError::BoundaryDeleted { position });
        }
        let kept = keep.iter().filter(|&&k| k).count();
        let mut tokens = Vec::with_capacity(kept);
        let mut mask = Vec::with_capacity(kept);
        for ((t, m), _) in self.tokens.iter().zip(&self.mask).zip(keep).filter(|(_, &k)| k) {
            tokens.push(*t);
            mask.push(*m);
        }
        Ok(DecodeState { tokens, mask, iteration: self.iteration, constraints: self.constraints.clone() })
    }

    /// Inserts `gap_counts[g]` placeholders between positions `g` and `g + 1`.
    pub fn apply_placeholder_insertion(
        &self,
        gap_counts: &[usize],
        max_length: usize,
    ) -> Result<DecodeState, EditError> {
        let gaps = self.tokens.len().saturating_sub(1);
        if gap_counts.len() != gaps {
            return Err(EditError::LengthMismatch {
                op: "apply_placeholder_insertion",
                expected: gaps,
                actual: gap_counts.len(),
            });
        }
        let length = self.tokens.len() + gap_counts.iter().sum::<usize>();
        if length > max_length {
            return Err(EditError::LengthLimitExceeded { length, limit: max_length });
        }
        let mut tokens = Vec::with_capacity(length);
        let mut mask = Vec::with_capacity(length);
        for (i, (t, m)) in self.tokens.iter().zip(&self.mask).enumerate() {
            tokens.push(*t);
            mask.push(*m);
            if let Some(&n) = gap_counts.get(i) {
                tokens.extend(std::iter::repeat_n(Token::Placeholder, n));
                mask.extend(std::iter::repeat_n(None, n));
            }
        }
        Ok(DecodeState { tokens, mask, iteration: self.iteration, constraints: self.constraints.clone() })
    }

    /// Replaces placeholders left to right with `fills`. Length and mask
    /// are untouched.
    pub fn fill_placeholders(&self, fills: &[Token]) -> Result<DecodeState, EditError> {
        let slots = self.placeholder_count();
        if fills.len() != slots {
            return Err(EditError::LengthMismatch { op: "fill_placeholders", expected: slots, actual: fills.len() });
        }
        if let Some((index, bad)) = fills.iter().enumerate().find(|(_, t)| !t.is_regular()) {
            return Err(EditError::InvalidFill { index, kind: bad.kind() });
        }
        let mut next = fills.iter();
        let tokens = self
            .tokens
            .iter()
            .map(|t| match t {
                Token::Placeholder => next.next().cloned().unwrap_or(Token::Placeholder),
                t => *t,
            })
            .collect();
        Ok(DecodeState {
            tokens,
            mask: self.mask.clone(),
            iteration: self.iteration,
            constraints: self.constraints.clone(),
        })
    }

    pub fn validate(&self) -> Result<(), Violation> {
        validate_state(self)
    }
}

/// The first broken invariant found by [`validate_state`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TooShort { len: usize },
    MissingBos,
    MissingEos,
    InteriorBoundary { position: usize },
    MaskLength { tokens: usize, mask: usize },
    MaskedBoundary { position: usize },
    UnknownConstraint { position: usize, constraint: usize },
    OffsetOutOfRange { position: usize, constraint: usize, offset: usize },
    MaskSurfaceMismatch { position: usize, expected: String, found: String },
    ConstraintOrder { position: usize },
    OffsetOrder { position: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooShort { len } => write!(f, "state too short ({len} tokens)"),
            Violation::MissingBos => f.write_str("missing <s> at position 0"),
            Violation::MissingEos => f.write_str("missing </s> at last position"),
            Violation::InteriorBoundary { position } => {
                write!(f, "boundary symbol inside the sequence at {position}")
            }
            Violation::MaskLength { tokens, mask } => {
                write!(f, "mask covers {mask} positions but state has {tokens}")
            }
            Violation::MaskedBoundary { position } => {
                write!(f, "boundary symbol at {position} is masked")
            }
            Violation::UnknownConstraint { position, constraint } => {
                write!(f, "mask at {position} names unknown constraint {constraint}")
            }
            Violation::OffsetOutOfRange { position, constraint, offset } => {
                write!(f, "mask at {position}: offset {offset} out of range for constraint {constraint}")
            }
            Violation::MaskSurfaceMismatch { position, expected, found } => {
                write!(f, "mask/surface mismatch at {position}: expected {expected}, found {found}")
            }
            Violation::ConstraintOrder { position } => {
                write!(f, "constraint order broken at {position}")
            }
            Violation::OffsetOrder { position } => {
                write!(f, "constraint offsets out of order at {position}")
            }
        }
    }
}

impl std::error::Error for Violation {}

/// Checks the structural invariants of a state.
///
/// Masked positions must read `(id, offset)` pairs in strictly increasing
/// lexicographic order from left to right, and each masked surface must
/// equal the constraint token it names. Masked runs need not be
/// contiguous: deletion of a constraint token or insertion inside a
/// constraint is legal in the weaker decoding modes.
pub fn validate_state(state: &DecodeState) -> Result<(), Violation> {
    let tokens = &state.tokens;
    let n = tokens.len();
    if n < 2 {
        return Err(Violation::TooShort { len: n });
    }
    if tokens[0] != Token::Bos {
        return Err(Violation::MissingBos);
    }
    if tokens[n - 1] != Token::Eos {
        return Err(Violation::MissingEos);
    }
    if let Some(p) = tokens[1..n - 1].iter().position(Token::is_boundary) {
        return Err(Violation::InteriorBoundary { position: p + 1 });
    }
    if state.mask.len() != n {
        return Err(Violation::MaskLength { tokens: n, mask: state.mask.len() });
    }
    for position in [0, n - 1] {
        if state.mask[position].is_some() {
            return Err(Violation::MaskedBoundary { position });
        }
    }
    let mut previous: Option<MaskEntry> = None;
    for (position, entry) in state.masked_positions() {
        let Some(c) = state.constraints.get(entry.constraint()) else {
            return Err(Violation::UnknownConstraint { position, constraint: entry.constraint() });
        };
        let Some(expected) = c.tokens().get(entry.offset()) else {
            return Err(Violation::OffsetOutOfRange {
                position,
                constraint: entry.constraint(),
                offset: entry.offset(),
            });
        };
        if *expected != tokens[position] {
            return Err(Violation::MaskSurfaceMismatch {
                position,
                expected: expected.surface().to_string(),
                found: tokens[position].surface().to_string(),
            });
        }
        if let Some(prev) = previous {
            if entry.constraint < prev.constraint {
                return Err(Violation::ConstraintOrder { position });
            }
            if entry.constraint == prev.constraint && entry.offset <= prev.offset {
                return Err(Violation::OffsetOrder { position });
            }
        }
        previous = Some(entry);
    }
    Ok(())
}
