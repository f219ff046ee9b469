//! Domain types: queries, responses, transcripts, verdicts, resource
//! accounting, and the trait contracts for capabilities, models, and
//! evaluators.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::StreamRng;

/// Payload encoding for queries or responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Codec {
    /// Each byte is 0 or 1; the payload is a bit vector.
    Bits,
    /// Arbitrary byte tokens.
    Tokens,
    /// Exactly one byte, a categorical symbol.
    Symbol,
}

impl Codec {
    pub fn validates(&self, payload: &[u8]) -> bool {
        match self {
            Codec::Bits => payload.iter().all(|b| *b <= 1),
            Codec::Tokens => true,
            Codec::Symbol => payload.len() == 1,
        }
    }

    /// Canonical zero payload: the default response for learners trained on
    /// nothing.
    pub fn zero_value(&self) -> Vec<u8> {
        match self {
            Codec::Bits => vec![0],
            Codec::Tokens => Vec::new(),
            Codec::Symbol => vec![0],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Codec::Bits => "bits",
            Codec::Tokens => "tokens",
            Codec::Symbol => "symbol",
        }
    }
}

/// Query and response codecs declared by a capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecPair {
    pub query: Codec,
    pub response: Codec,
}

impl CodecPair {
    pub fn new(query: Codec, response: Codec) -> Self {
        CodecPair { query, response }
    }
}

/// Opaque query payload. Equality is byte equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Query(pub Vec<u8>);

impl Query {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        hex_of(&self.0)
    }
}

/// Opaque response payload. Equality is byte equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Response(pub Vec<u8>);

impl Response {
    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        hex_of(&self.0)
    }
}

fn hex_of(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 * bytes.len());
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// One draw from a capability's joint distribution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SamplePair {
    pub query: Query,
    pub response: Response,
}

impl SamplePair {
    pub fn new(query: Query, response: Response) -> Self {
        SamplePair { query, response }
    }
}

/// Terminal decision of an evaluator session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn accepts(self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Ordered record of the query/response rounds of one interaction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<SamplePair>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn push(&mut self, query: Query, response: Response) {
        self.rounds.push(SamplePair::new(query, response));
    }
}

/// What an evaluator session does next: ask one more query or stop with a
/// verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStep {
    Ask(Query),
    Decide(Verdict),
}

/// One round of an enumerable single-round evaluator: with probability
/// `weight` the evaluator asks `query` and accepts exactly the responses in
/// `accepted`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSpec {
    pub weight: f64,
    pub query: Query,
    pub accepted: Vec<Response>,
}

/// Ground-truth distribution over query/response pairs, with conditional
/// response sampling and optional exact enumeration.
pub trait Capability: Send + Sync {
    fn name(&self) -> String;

    fn codec(&self) -> CodecPair;

    /// One draw from the joint distribution.
    fn sample(&self, rng: &mut StreamRng) -> SamplePair;

    /// One draw from the conditional response distribution given `x`.
    fn conditional_sample(&self, x: &Query, rng: &mut StreamRng) -> Result<Response>;

    /// Exact joint table when the capability is small enough to enumerate.
    /// Probabilities sum to 1 within 1e-12.
    fn enumerate(&self) -> Option<Vec<(SamplePair, f64)>> {
        None
    }

    /// True when `conditional_sample` is a function of the query alone.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// Query marginal derived from `enumerate`, first-seen order, weights
    /// summed per query.
    fn query_marginal(&self) -> Option<Vec<(Query, f64)>> {
        let table = self.enumerate()?;
        let mut order: Vec<Query> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        for (pair, p) in &table {
            match order.iter().position(|q| q == &pair.query) {
                Some(i) => mass[i] += p,
                None => {
                    order.push(pair.query.clone());
                    mass.push(*p);
                }
            }
        }
        Some(order.into_iter().zip(mass).collect())
    }

    /// Exact conditional response distribution for `x`, derived from
    /// `enumerate`. `None` when the capability is not enumerable or `x`
    /// carries no mass.
    fn conditional_distribution(&self, x: &Query) -> Option<Vec<(Response, f64)>> {
        let table = self.enumerate()?;
        let mut rows: Vec<(Response, f64)> = Vec::new();
        let mut total = 0.0;
        for (pair, p) in &table {
            if &pair.query == x {
                rows.push((pair.response.clone(), *p));
                total += p;
            }
        }
        if total <= 0.0 {
            return None;
        }
        for (_, p) in &mut rows {
            *p /= total;
        }
        Some(rows)
    }
}

/// A (possibly randomized) query-to-response mapping under evaluation; also
/// the shape of every black box an interaction talks to.
pub trait Model: Send + Sync {
    fn name(&self) -> String;

    fn respond(&self, x: &Query, rng: &mut StreamRng) -> Result<Response>;

    /// True when `respond` ignores its coins.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// Exact response distribution for enumeration-based computations, when
    /// known in closed form. Deterministic models need not override this;
    /// callers fall back to a point mass on `respond`.
    fn response_distribution(&self, _x: &Query) -> Option<Vec<(Response, f64)>> {
        None
    }

    /// Queries the model memorized at training time, when it stores any.
    /// Exposing this is what lets a derived evaluator read the trained
    /// artifact — exactly the shortcut the independence flag exists to catch.
    fn training_queries(&self) -> Option<Vec<Query>> {
        None
    }

    /// Called before the first query of an interaction. Remote models open
    /// their session here.
    fn begin_session(&self) -> Result<()> {
        Ok(())
    }

    /// Called after the verdict of a successful interaction.
    fn end_session(&self) -> Result<()> {
        Ok(())
    }
}

/// Stateful adaptive interaction: issues queries, sees the transcript so
/// far, and ends with a verdict.
pub trait EvaluatorSession {
    fn next(&mut self, transcript: &Transcript, rng: &mut StreamRng) -> Result<SessionStep>;
}

/// Evaluator: creates sessions and declares a hard round limit.
pub trait Evaluator: Send + Sync {
    fn name(&self) -> String;

    /// Hard upper bound on queries per session. Sessions may stop earlier.
    fn max_rounds(&self) -> u32;

    fn session(&self) -> Box<dyn EvaluatorSession + '_>;

    /// Single-round evaluators that can list their (query weight, accepted
    /// responses) table return it here; everything else reports `None`.
    fn enumerate_rounds(&self) -> Option<Vec<RoundSpec>> {
        None
    }
}

pub type CapabilityRef = Arc<dyn Capability>;
pub type ModelRef = Arc<dyn Model>;
pub type EvaluatorRef = Arc<dyn Evaluator>;

/// Monotone step counter learners tick while training; units are abstract
/// compute steps.
#[derive(Debug, Clone, Default)]
pub struct ComputeMeter {
    steps: u64,
}

impl ComputeMeter {
    pub fn new() -> Self {
        ComputeMeter::default()
    }

    pub fn step(&mut self, n: u64) {
        self.steps = self.steps.saturating_add(n);
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Measured resource consumption of a run: samples per side, rounds,
/// queries, learner compute, and expressivity when the hypothesis class is
/// finite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub samples_model: u64,
    pub samples_evaluator: u64,
    pub rounds_declared: u64,
    pub model_queries: u64,
    pub interactions: u64,
    pub learner_steps_model: u64,
    pub learner_steps_evaluator: u64,
    pub expressivity_bits_model: Option<f64>,
    pub expressivity_bits_evaluator: Option<f64>,
    /// Number of times a randomness stream key was registered twice. Zero
    /// means every registered draw used its own stream.
    pub stream_key_collisions: u64,
    #[serde(skip)]
    seen_stream_keys: BTreeSet<String>,
}

impl ResourceLedger {
    pub fn new() -> Self {
        ResourceLedger::default()
    }

    /// Register a stream key; duplicate registrations are counted as
    /// collisions so sample-disjointness stays assertable.
    pub fn record_stream_key(&mut self, key: &str) {
        if !self.seen_stream_keys.insert(key.to_string()) {
            self.stream_key_collisions += 1;
        }
    }

    pub fn stream_keys(&self) -> impl Iterator<Item = &str> {
        self.seen_stream_keys.iter().map(|s| s.as_str())
    }

    pub fn note_rounds(&mut self, r: u32) {
        self.rounds_declared = self.rounds_declared.max(u64::from(r));
    }

    pub fn merge(&mut self, other: &ResourceLedger) {
        self.samples_model += other.samples_model;
        self.samples_evaluator += other.samples_evaluator;
        self.rounds_declared = self.rounds_declared.max(other.rounds_declared);
        self.model_queries += other.model_queries;
        self.interactions += other.interactions;
        self.learner_steps_model += other.learner_steps_model;
        self.learner_steps_evaluator += other.learner_steps_evaluator;
        if self.expressivity_bits_model.is_none() {
            self.expressivity_bits_model = other.expressivity_bits_model;
        }
        if self.expressivity_bits_evaluator.is_none() {
            self.expressivity_bits_evaluator = other.expressivity_bits_evaluator;
        }
        self.stream_key_collisions += other.stream_key_collisions;
        for key in &other.seen_stream_keys {
            if !self.seen_stream_keys.insert(key.clone()) {
                self.stream_key_collisions += 1;
            }
        }
    }
}

/// Check that a probability table sums to 1 within `tol`.
pub fn check_normalized(probs: impl Iterator<Item = f64>, tol: f64, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for p in probs {
        if !(0.0..=1.0 + tol).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "{what}: probability {p} outside [0, 1]"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::InvalidConfig(format!(
            "{what}: probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}
