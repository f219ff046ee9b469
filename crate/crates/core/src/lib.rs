//! Evaluation as a two-player protocol: an evaluator interrogates a black
//! box for a bounded number of rounds and must tell a learned model from
//! the capability it was trained on. The library provides the interaction
//! engine, exact and Monte Carlo estimators for the distinction statistic,
//! learners for both sides, a zoo of evaluator constructions, desk-scale
//! reference capabilities with brute-force oracles, and a wire protocol for
//! serving models out of process.
//!
//! Everything is driven by keyed randomness streams ([`RandomSource`]), so
//! any run — local, parallel, or remote — replays bit-for-bit from its
//! master seed.

pub mod capabilities;
pub mod distinction;
pub mod error;
pub mod interact;
pub mod learners;
pub mod random;
pub mod remote;
pub mod types;
pub mod zoo;

pub use error::{Error, Result};
pub use random::{RandomSource, StreamRng};
pub use types::{
    Capability, CapabilityRef, Codec, CodecPair, ComputeMeter, Evaluator, EvaluatorRef,
    EvaluatorSession, Model, ModelRef, Query, ResourceLedger, Response, RoundSpec, SamplePair,
    SessionStep, Transcript, Verdict,
};

pub use distinction::{
    decide_distinguish, exact_distinction, hoeffding_radius, mc_distinction, Decision,
    DistinctionEstimate,
};
pub use interact::{capability_as_blackbox, run_interaction};
pub use learners::{
    draw_disjoint_samples, pseudointelligence_experiment, pseudointelligence_trial,
    CapabilityReport, EvaluatorLearner, ExperimentConfig, ExperimentSettings, ModelLearner,
    PseudointelligenceReport, TrialRecord, TrialRun,
};
