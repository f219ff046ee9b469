//! Error taxonomy shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A session emitted more queries than its declared round budget.
    #[error("session overrun: evaluator declared {declared} rounds but emitted {emitted} queries")]
    SessionOverrun { declared: u32, emitted: u32 },

    /// The black box could not answer a query (remote disconnect, timeout,
    /// protocol violation). Trials hitting this are errored, not failed.
    #[error("black box failure: {0}")]
    BlackBoxFailure(String),

    /// A query fell outside the declared query space of a capability or model.
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),

    /// Invalid run parameters (zero trial count, out-of-range alpha, ...).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Exact computation was requested but some party cannot be enumerated.
    #[error("not enumerable: {0}")]
    NotEnumerable(String),

    /// A distinguisher class with no members.
    #[error("distinguisher class is empty")]
    EmptyClass,

    /// A dataset-backed evaluator was given no samples.
    #[error("sample set is empty")]
    EmptySampleSet,

    /// Adversarial filtering removed every pair: the auxiliary model was
    /// indistinguishable from the capability on the seed set.
    #[error("challenge set is empty: auxiliary model made no errors on the seed samples")]
    EmptyChallengeSet,

    /// No parity function is consistent with the training samples.
    #[error("inconsistent samples: no parity fits the training set")]
    Inconsistent,

    /// A query generator's filter rejected every candidate within budget.
    #[error("generator exhausted: filter rejected all candidates within {budget} attempts")]
    GeneratorExhausted { budget: u32 },

    /// Malformed payload, handshake mismatch, or other wire-level fault.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
