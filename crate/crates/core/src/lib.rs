//! Lexically constrained edit-based decoding.
//!
//! A Levenshtein-Transformer style refinement loop (delete, insert
//! placeholders, fill placeholders) driven by a pluggable [`Policy`], with
//! the constraint mechanisms layered on top:
//!
//! * constraint insertion: the initial hypothesis is `<s> C1 .. Cm </s>`,
//! * forced keep: masked constraint tokens survive every deletion pass,
//! * no intra-constraint insertion: gaps inside a multi-token constraint
//!   always receive zero placeholders.
//!
//! Around the engine sit constraint extraction from bilingual dictionaries
//! ([`constraints`]), metrics and benchmarking ([`eval`]), and the `levt`
//! command line ([`cli`]).

pub mod cli;
pub mod constraints;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod policy;
pub mod state;

pub use decoder::{decode, init_state, step, DecodeConfig, DecodeResult, Mode, Termination};
pub use error::EditError;
pub use policy::Policy;
pub use state::{validate_state, Constraint, ConstraintList, DecodeState, MaskEntry, Token, TokenKind, Violation};
