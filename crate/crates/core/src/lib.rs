//! Operator precedence automata on finite and infinite words.
//!
//! This crate implements operator precedence matrices (OPMs), the pushdown
//! automata they drive (OPAs), and their ω-word variants with Büchi
//! final-state, Büchi empty-stack and Muller acceptance. On top of the raw
//! machines it provides the boolean closures (intersection, union,
//! concatenation of a finite-word language with an ω-language, and
//! complementation through pseudorun transduction), emptiness checking via a
//! Büchi pushdown encoding, and language inclusion with counterexample
//! lassos.
//!
//! The building blocks:
//!
//! * [`opm`] — precedence matrices, chains and chain factorizations;
//! * [`opa`] — finite-word automata, runs, traces and the variant-acceptance
//!   conversions;
//! * [`omega`] — ω-automata, acceptance conversions and lasso membership;
//! * [`pds`] — Büchi pushdown encoding, `pre*` saturation and emptiness;
//! * [`nba`] — plain Büchi automata over opaque symbols, with rank-based
//!   complementation;
//! * [`closures`] — the language operations on ω-automata;
//! * [`corpus`] — bundled example matrices and automata used by the tests
//!   and the CLI.
//!
//! Infinite words are always presented as ultimately periodic *lassos*
//! `u·v^ω`; see [`omega::Lasso`].

pub mod closures;
pub mod corpus;
pub mod nba;
pub mod omega;
pub mod opa;
pub mod opm;
pub mod pds;

pub(crate) mod reach;

/// Errors reported by matrix and automaton constructors, parsers and
/// operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A symbol was used that is not part of the relevant alphabet.
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    /// A state name was used that is not part of the automaton.
    #[error("unknown state `{0}`")]
    UnknownState(String),
    /// Two sources disagree on a precedence cell.
    #[error("precedence conflict on ({a}, {b}): {first} vs {second}")]
    Conflict {
        a: String,
        b: String,
        first: String,
        second: String,
    },
    /// A structural validity check failed.
    #[error("invalid {what}: {why}")]
    Invalid { what: String, why: String },
    /// A precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Malformed JSON input.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// A fixture name that the corpus does not know.
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
