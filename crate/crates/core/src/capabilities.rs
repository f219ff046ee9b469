//! Desk-scale capability families (explicit tables, GF(2) parities, k-gram
//! chains), the model learners that go with them, and exact oracles for the
//! quantities the test suite pins down.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::ModelLearner;
use crate::random::StreamRng;
use crate::types::{
    check_normalized, Capability, CapabilityRef, Codec, CodecPair, ComputeMeter, Model, ModelRef,
    Query, Response, SamplePair,
};

fn draw_indexed(weights: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// Tabular capability

#[derive(Debug, Clone)]
pub struct TableRow {
    pub query: Query,
    pub query_prob: f64,
    pub responses: Vec<(Response, f64)>,
}

/// Explicit finite joint distribution: each query carries its marginal mass
/// and a normalized response distribution.
pub struct TabularCapability {
    name: String,
    codec: CodecPair,
    rows: Vec<TableRow>,
    index: BTreeMap<Query, usize>,
}

impl TabularCapability {
    pub fn new(name: impl Into<String>, codec: CodecPair, mut rows: Vec<TableRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("tabular capability with no rows".into()));
        }
        check_normalized(rows.iter().map(|r| r.query_prob), 1e-9, "query marginal")?;
        let total: f64 = rows.iter().map(|r| r.query_prob).sum();
        for row in &mut rows {
            row.query_prob /= total;
            if row.responses.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "query {} has no responses",
                    row.query.hex()
                )));
            }
            check_normalized(row.responses.iter().map(|(_, p)| *p), 1e-9, "response row")?;
            let rt: f64 = row.responses.iter().map(|(_, p)| p).sum();
            for (_, p) in &mut row.responses {
                *p /= rt;
            }
        }
        let mut index = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            if index.insert(row.query.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "duplicate query {} in table",
                    row.query.hex()
                )));
            }
        }
        Ok(TabularCapability { name: name.into(), codec, rows, index })
    }

    /// Convenience constructor for a deterministic table.
    pub fn deterministic(
        name: impl Into<String>,
        codec: CodecPair,
        points: Vec<(Query, f64, Response)>,
    ) -> Result<Self> {
        let rows = points
            .into_iter()
            .map(|(query, query_prob, response)| TableRow {
                query,
                query_prob,
                responses: vec![(response, 1.0)],
            })
            .collect();
        TabularCapability::new(name, codec, rows)
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }
}

impl Capability for TabularCapability {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn codec(&self) -> CodecPair {
        self.codec
    }

    fn sample(&self, rng: &mut StreamRng) -> SamplePair {
        let qw: Vec<f64> = self.rows.iter().map(|r| r.query_prob).collect();
        let row = &self.rows[draw_indexed(&qw, rng)];
        let rw: Vec<f64> = row.responses.iter().map(|(_, p)| *p).collect();
        let response = row.responses[draw_indexed(&rw, rng)].0.clone();
        SamplePair::new(row.query.clone(), response)
    }

    fn conditional_sample(&self, x: &Query, rng: &mut StreamRng) -> Result<Response> {
        let row = self
            .index
            .get(x)
            .map(|i| &self.rows[*i])
            .ok_or_else(|| Error::UnsupportedQuery(x.hex()))?;
        let rw: Vec<f64> = row.responses.iter().map(|(_, p)| *p).collect();
        Ok(row.responses[draw_indexed(&rw, rng)].0.clone())
    }

    fn enumerate(&self) -> Option<Vec<(SamplePair, f64)>> {
        let mut table = Vec::new();
        for row in &self.rows {
            for (y, p) in &row.responses {
                table.push((SamplePair::new(row.query.clone(), y.clone()), row.query_prob * p));
            }
        }
        Some(table)
    }

    fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|r| r.responses.len() == 1)
    }
}

// ---------------------------------------------------------------------------
// Parity capability

/// Convert a bit-vector query (one byte per bit, x_1 first) to an integer
/// with x_i at bit i−1.
pub fn query_to_bits(x: &Query, d: u32) -> Result<u64> {
    if x.0.len() != d as usize {
        return Err(Error::UnsupportedQuery(format!(
            "query {} has {} bits, expected {d}",
            x.hex(),
            x.0.len()
        )));
    }
    let mut v = 0u64;
    for (i, b) in x.0.iter().enumerate() {
        if *b > 1 {
            return Err(Error::UnsupportedQuery(format!("byte {b} is not a bit")));
        }
        v |= u64::from(*b) << i;
    }
    Ok(v)
}

pub fn bits_to_query(v: u64, d: u32) -> Query {
    Query((0..d).map(|i| ((v >> i) & 1) as u8).collect())
}

/// XOR of the query bits selected by a hidden index set, with a query
/// marginal over {0,1}^d (uniform unless explicit weights are given).
pub struct ParityCapability {
    name: String,
    d: u32,
    mask: u64,
    weights: Option<Vec<f64>>,
}

impl ParityCapability {
    pub fn new(name: impl Into<String>, d: u32, mask: u64) -> Result<Self> {
        if d == 0 || d > 16 {
            return Err(Error::InvalidConfig(format!("parity dimension {d} outside 1..=16")));
        }
        if mask >> d != 0 {
            return Err(Error::InvalidConfig("parity mask has bits beyond the dimension".into()));
        }
        Ok(ParityCapability { name: name.into(), d, mask, weights: None })
    }

    /// Replace the uniform query marginal with explicit weights indexed by
    /// the query's integer encoding.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 1 << self.d {
            return Err(Error::InvalidConfig(format!(
                "need {} weights, got {}",
                1u64 << self.d,
                weights.len()
            )));
        }
        check_normalized(weights.iter().copied(), 1e-9, "parity query marginal")?;
        let total: f64 = weights.iter().sum();
        self.weights = Some(weights.into_iter().map(|w| w / total).collect());
        Ok(self)
    }

    /// Build the mask from 1-based index sets like {1, 3}.
    pub fn mask_from_indices(indices: &[u32]) -> u64 {
        indices.iter().fold(0u64, |m, i| m | (1 << (i - 1)))
    }

    pub fn dimension(&self) -> u32 {
        self.d
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    fn label(&self, v: u64) -> u8 {
        ((v & self.mask).count_ones() % 2) as u8
    }

    fn query_prob(&self, v: u64) -> f64 {
        match &self.weights {
            Some(w) => w[v as usize],
            None => 1.0 / (1u64 << self.d) as f64,
        }
    }
}

impl Capability for ParityCapability {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn codec(&self) -> CodecPair {
        CodecPair::new(Codec::Bits, Codec::Bits)
    }

    fn sample(&self, rng: &mut StreamRng) -> SamplePair {
        let v = match &self.weights {
            Some(w) => draw_indexed(w, rng) as u64,
            None => rng.gen_range(0..(1u64 << self.d)),
        };
        SamplePair::new(bits_to_query(v, self.d), Response(vec![self.label(v)]))
    }

    fn conditional_sample(&self, x: &Query, _rng: &mut StreamRng) -> Result<Response> {
        let v = query_to_bits(x, self.d)?;
        Ok(Response(vec![self.label(v)]))
    }

    fn enumerate(&self) -> Option<Vec<(SamplePair, f64)>> {
        let table = (0..(1u64 << self.d))
            .map(|v| {
                (
                    SamplePair::new(bits_to_query(v, self.d), Response(vec![self.label(v)])),
                    self.query_prob(v),
                )
            })
            .collect();
        Some(table)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// k-gram capability

/// Next-symbol distribution conditioned on the last k symbols of a
/// fixed-length prefix; the prefix marginal is uniform over alphabet^L.
pub struct KGramCapability {
    name: String,
    k: usize,
    alphabet: Vec<u8>,
    prefix_len: usize,
    transitions: BTreeMap<Vec<u8>, Vec<(u8, f64)>>,
}

impl KGramCapability {
    pub fn new(
        name: impl Into<String>,
        k: usize,
        alphabet: Vec<u8>,
        prefix_len: usize,
        mut transitions: BTreeMap<Vec<u8>, Vec<(u8, f64)>>,
    ) -> Result<Self> {
        if k == 0 || prefix_len < k {
            return Err(Error::InvalidConfig(format!(
                "need prefix_len >= k >= 1, got k={k}, prefix_len={prefix_len}"
            )));
        }
        if alphabet.is_empty() {
            return Err(Error::InvalidConfig("empty alphabet".into()));
        }
        let mut sorted = alphabet.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != alphabet.len() {
            return Err(Error::InvalidConfig("alphabet has duplicate symbols".into()));
        }
        let contexts = enumerate_strings(&alphabet, k);
        for ctx in &contexts {
            let row = transitions
                .get_mut(ctx)
                .ok_or_else(|| Error::InvalidConfig(format!("missing transition row {ctx:?}")))?;
            check_normalized(row.iter().map(|(_, p)| *p), 1e-9, "transition row")?;
            let total: f64 = row.iter().map(|(_, p)| p).sum();
            for (sym, p) in row.iter_mut() {
                if !alphabet.contains(sym) {
                    return Err(Error::InvalidConfig(format!("symbol {sym} outside alphabet")));
                }
                *p /= total;
            }
        }
        if transitions.len() != contexts.len() {
            return Err(Error::InvalidConfig("transition rows for unknown contexts".into()));
        }
        Ok(KGramCapability { name: name.into(), k, alphabet, prefix_len, transitions })
    }

    fn context_of<'q>(&self, x: &'q Query) -> &'q [u8] {
        &x.0[x.0.len() - self.k..]
    }

    fn check_query(&self, x: &Query) -> Result<()> {
        if x.0.len() != self.prefix_len || x.0.iter().any(|s| !self.alphabet.contains(s)) {
            return Err(Error::UnsupportedQuery(x.hex()));
        }
        Ok(())
    }
}

fn enumerate_strings(alphabet: &[u8], len: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * alphabet.len());
        for prefix in &out {
            for s in alphabet {
                let mut p = prefix.clone();
                p.push(*s);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

impl Capability for KGramCapability {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn codec(&self) -> CodecPair {
        CodecPair::new(Codec::Tokens, Codec::Symbol)
    }

    fn sample(&self, rng: &mut StreamRng) -> SamplePair {
        let prefix: Vec<u8> = (0..self.prefix_len)
            .map(|_| self.alphabet[rng.gen_range(0..self.alphabet.len())])
            .collect();
        let q = Query(prefix);
        let y = self.conditional_sample(&q, rng).expect("generated prefix is valid");
        SamplePair::new(q, y)
    }

    fn conditional_sample(&self, x: &Query, rng: &mut StreamRng) -> Result<Response> {
        self.check_query(x)?;
        let row = &self.transitions[self.context_of(x)];
        let weights: Vec<f64> = row.iter().map(|(_, p)| *p).collect();
        Ok(Response(vec![row[draw_indexed(&weights, rng)].0]))
    }

    fn enumerate(&self) -> Option<Vec<(SamplePair, f64)>> {
        let count = (self.alphabet.len() as u64).checked_pow(self.prefix_len as u32)?;
        if count > 1 << 16 {
            return None;
        }
        let prefixes = enumerate_strings(&self.alphabet, self.prefix_len);
        let qp = 1.0 / prefixes.len() as f64;
        let mut table = Vec::new();
        for prefix in prefixes {
            let row = &self.transitions[&prefix[prefix.len() - self.k..]];
            for (sym, p) in row {
                table.push((
                    SamplePair::new(Query(prefix.clone()), Response(vec![*sym])),
                    qp * p,
                ));
            }
        }
        Some(table)
    }

    fn is_deterministic(&self) -> bool {
        self.transitions.values().all(|row| row.iter().filter(|(_, p)| *p > 0.0).count() == 1)
    }
}

// ---------------------------------------------------------------------------
// Models

/// Lookup table with a fixed default for unseen queries.
pub struct MemorizerModel {
    table: BTreeMap<Query, Response>,
    default: Response,
}

impl MemorizerModel {
    pub fn table(&self) -> &BTreeMap<Query, Response> {
        &self.table
    }
}

impl Model for MemorizerModel {
    fn name(&self) -> String {
        format!("memorizer[{}]", self.table.len())
    }

    fn respond(&self, x: &Query, _rng: &mut StreamRng) -> Result<Response> {
        Ok(self.table.get(x).cloned().unwrap_or_else(|| self.default.clone()))
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn training_queries(&self) -> Option<Vec<Query>> {
        Some(self.table.keys().cloned().collect())
    }
}

/// Memorize the sample set; later pairs win when a query repeats with a
/// different label.
pub fn learn_memorizer(samples: &[SamplePair], default: Response) -> MemorizerModel {
    let mut table = BTreeMap::new();
    for pair in samples {
        if let Some(old) = table.insert(pair.query.clone(), pair.response.clone()) {
            if old != pair.response {
                log::warn!(
                    "conflicting labels for query {}; keeping the later one",
                    pair.query.hex()
                );
            }
        }
    }
    MemorizerModel { table, default }
}

#[derive(Debug, Clone)]
pub struct ParityModel {
    d: u32,
    mask: u64,
}

impl ParityModel {
    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn indices(&self) -> Vec<u32> {
        (0..self.d).filter(|i| self.mask >> i & 1 == 1).map(|i| i + 1).collect()
    }
}

impl Model for ParityModel {
    fn name(&self) -> String {
        format!("parity[d={}, mask={:#x}]", self.d, self.mask)
    }

    fn respond(&self, x: &Query, _rng: &mut StreamRng) -> Result<Response> {
        let v = query_to_bits(x, self.d)?;
        Ok(Response(vec![((v & self.mask).count_ones() % 2) as u8]))
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Solve the GF(2) linear system the samples induce and return the smallest
/// consistent index set, ordering index sets by their characteristic vector
/// (prefer excluding index 1, then index 2, …).
///
/// The eliminator pivots on columns from the highest index down, so the free
/// columns are the lowest ones; zeroing the free variables then yields the
/// characteristic-vector minimum of the solution coset.
pub fn learn_parity(samples: &[SamplePair], d: u32, meter: &mut ComputeMeter) -> Result<ParityModel> {
    if d == 0 || d > 16 {
        return Err(Error::InvalidConfig(format!("parity dimension {d} outside 1..=16")));
    }
    let mut rows: Vec<(u64, u8)> = Vec::with_capacity(samples.len());
    for pair in samples {
        let lhs = query_to_bits(&pair.query, d)?;
        let rhs = match pair.response.0.as_slice() {
            [b] if *b <= 1 => *b,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "response {} is not a single bit",
                    pair.response.hex()
                )))
            }
        };
        rows.push((lhs, rhs));
    }

    let mut pivots: Vec<(u32, usize)> = Vec::new();
    let mut used = vec![false; rows.len()];
    for col in (0..d).rev() {
        let Some(pivot) = (0..rows.len()).find(|i| !used[*i] && rows[*i].0 >> col & 1 == 1) else {
            continue;
        };
        used[pivot] = true;
        pivots.push((col, pivot));
        let (plhs, prhs) = rows[pivot];
        for i in 0..rows.len() {
            if i != pivot && rows[i].0 >> col & 1 == 1 {
                rows[i].0 ^= plhs;
                rows[i].1 ^= prhs;
                meter.step(1);
            }
        }
        meter.step(1);
    }

    if rows.iter().any(|(lhs, rhs)| *lhs == 0 && *rhs == 1) {
        return Err(Error::Inconsistent);
    }

    let mut mask = 0u64;
    for (col, row) in &pivots {
        // Non-pivot bits in a pivot row are free columns, all forced to 0.
        if rows[*row].1 == 1 {
            mask |= 1 << col;
        }
    }
    Ok(ParityModel { d, mask })
}

pub struct ConstantModel {
    value: Response,
}

impl ConstantModel {
    pub fn new(value: Response) -> Self {
        ConstantModel { value }
    }

    pub fn value(&self) -> &Response {
        &self.value
    }
}

impl Model for ConstantModel {
    fn name(&self) -> String {
        format!("constant[{}]", self.value.hex())
    }

    fn respond(&self, _x: &Query, _rng: &mut StreamRng) -> Result<Response> {
        Ok(self.value.clone())
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Majority response over the samples; ties go to the byte-wise smallest
/// response, and an empty sample set falls back to the codec's zero value.
pub fn learn_constant(samples: &[SamplePair], response_codec: Codec) -> ConstantModel {
    let mut counts: BTreeMap<&Response, u64> = BTreeMap::new();
    for pair in samples {
        *counts.entry(&pair.response).or_insert(0) += 1;
    }
    let value = counts
        .into_iter()
        .max_by(|(ya, ca), (yb, cb)| ca.cmp(cb).then_with(|| yb.cmp(ya)))
        .map(|(y, _)| y.clone())
        .unwrap_or_else(|| Response(response_codec.zero_value()));
    ConstantModel { value }
}

/// Add-one-smoothed transition counts; responds by sampling the learned row
/// for the query's last-k context.
pub struct KGramModel {
    k: usize,
    alphabet: Vec<u8>,
    counts: BTreeMap<Vec<u8>, BTreeMap<u8, u64>>,
}

impl KGramModel {
    fn row(&self, context: &[u8]) -> Vec<(Response, f64)> {
        let counts = self.counts.get(context);
        let total: u64 = counts.map(|c| c.values().sum()).unwrap_or(0);
        let denom = (total + self.alphabet.len() as u64) as f64;
        self.alphabet
            .iter()
            .map(|sym| {
                let c = counts.and_then(|m| m.get(sym)).copied().unwrap_or(0);
                (Response(vec![*sym]), (c + 1) as f64 / denom)
            })
            .collect()
    }

    fn context_of<'q>(&self, x: &'q Query) -> &'q [u8] {
        if x.0.len() <= self.k {
            &x.0
        } else {
            &x.0[x.0.len() - self.k..]
        }
    }
}

impl Model for KGramModel {
    fn name(&self) -> String {
        format!("kgram[k={}, contexts={}]", self.k, self.counts.len())
    }

    fn respond(&self, x: &Query, rng: &mut StreamRng) -> Result<Response> {
        let row = self.row(self.context_of(x));
        let weights: Vec<f64> = row.iter().map(|(_, p)| *p).collect();
        Ok(row[draw_indexed(&weights, rng)].0.clone())
    }

    fn response_distribution(&self, x: &Query) -> Option<Vec<(Response, f64)>> {
        Some(self.row(self.context_of(x)))
    }
}

pub fn learn_kgram(samples: &[SamplePair], k: usize, alphabet: Vec<u8>) -> Result<KGramModel> {
    if k == 0 || alphabet.is_empty() {
        return Err(Error::InvalidConfig("k-gram learner needs k >= 1 and a non-empty alphabet".into()));
    }
    let mut counts: BTreeMap<Vec<u8>, BTreeMap<u8, u64>> = BTreeMap::new();
    for pair in samples {
        let ctx = if pair.query.0.len() <= k {
            pair.query.0.clone()
        } else {
            pair.query.0[pair.query.0.len() - k..].to_vec()
        };
        let sym = match pair.response.0.as_slice() {
            [s] => *s,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "response {} is not a single symbol",
                    pair.response.hex()
                )))
            }
        };
        *counts.entry(ctx).or_default().entry(sym).or_insert(0) += 1;
    }
    Ok(KGramModel { k, alphabet, counts })
}

// ---------------------------------------------------------------------------
// Model learners (trait impls)

pub struct MemorizerLearner {
    pub default: Response,
}

impl ModelLearner for MemorizerLearner {
    fn name(&self) -> String {
        "memorizer".into()
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<ModelRef> {
        meter.step(samples.len() as u64);
        Ok(Arc::new(learn_memorizer(samples, self.default.clone())))
    }
}

pub struct ParityLearner {
    pub d: u32,
}

impl ModelLearner for ParityLearner {
    fn name(&self) -> String {
        format!("parity-solver[d={}]", self.d)
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<ModelRef> {
        Ok(Arc::new(learn_parity(samples, self.d, meter)?))
    }

    fn expressivity_bits(&self, _samples: &[SamplePair]) -> Option<f64> {
        Some(f64::from(self.d))
    }
}

pub struct ConstantLearner {
    pub response_codec: Codec,
}

impl ModelLearner for ConstantLearner {
    fn name(&self) -> String {
        "constant".into()
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<ModelRef> {
        meter.step(samples.len() as u64);
        Ok(Arc::new(learn_constant(samples, self.response_codec)))
    }
}

pub struct KGramLearner {
    pub k: usize,
    pub alphabet: Vec<u8>,
}

impl ModelLearner for KGramLearner {
    fn name(&self) -> String {
        format!("kgram[k={}]", self.k)
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<ModelRef> {
        meter.step(samples.len() as u64);
        Ok(Arc::new(learn_kgram(samples, self.k, self.alphabet.clone())?))
    }
}

/// Outputs the capability's own conditional sampler regardless of the
/// samples: the one-hypothesis learner that is trivially indistinguishable.
pub struct ExactCopyLearner {
    pub capability: CapabilityRef,
}

impl ModelLearner for ExactCopyLearner {
    fn name(&self) -> String {
        "exact-copy".into()
    }

    fn train(
        &self,
        _samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<ModelRef> {
        meter.step(1);
        Ok(Arc::new(crate::interact::CapabilitySampler::new(self.capability.clone())))
    }

    fn expressivity_bits(&self, _samples: &[SamplePair]) -> Option<f64> {
        Some(0.0)
    }
}

// ---------------------------------------------------------------------------
// Exact oracles for the parity suite

fn bitrev(v: u64, d: u32) -> u64 {
    (0..d).fold(0u64, |acc, i| acc | ((v >> i & 1) << (d - 1 - i)))
}

/// Smallest element of the set under the characteristic-vector order used by
/// the parity learner.
fn charlex_min(candidates: impl Iterator<Item = u64>, d: u32) -> Option<u64> {
    candidates.min_by_key(|t| bitrev(*t, d))
}

/// Exact probability that the parity learner recovers the hidden mask from m
/// uniform samples: dynamic programming over the subspace spanned by the
/// drawn queries, then a coset minimum check per terminal subspace. Supports
/// d ≤ 6 (the span is tracked as a bitmask over all 2^d vectors).
pub fn parity_recovery_probability(d: u32, mask: u64, m: u32) -> Result<f64> {
    if d == 0 || d > 6 {
        return Err(Error::InvalidConfig(format!("oracle supports d in 1..=6, got {d}")));
    }
    if mask >> d != 0 {
        return Err(Error::InvalidConfig("mask has bits beyond the dimension".into()));
    }
    let n = 1u64 << d;
    let per_draw = 1.0 / n as f64;

    // Span bitmask: bit v set iff vector v is in the span. {0} to start.
    let mut states: HashMap<u64, f64> = HashMap::new();
    states.insert(1u64, 1.0);
    for _ in 0..m {
        let mut next: HashMap<u64, f64> = HashMap::new();
        for (span, prob) in &states {
            for x in 0..n {
                let new_span = if span >> x & 1 == 1 {
                    *span
                } else {
                    let mut s = 0u64;
                    for v in 0..n {
                        if span >> v & 1 == 1 {
                            s |= 1 << v;
                            s |= 1 << (v ^ x);
                        }
                    }
                    s
                };
                *next.entry(new_span).or_insert(0.0) += prob * per_draw;
            }
        }
        states = next;
    }

    let mut correct = 0.0;
    for (span, prob) in &states {
        // Consistent masks form the coset mask ⊕ span-orthogonal-complement.
        let coset = (0..n).filter(|u| {
            (0..n).all(|v| span >> v & 1 == 0 || (u & v).count_ones() % 2 == 0)
        });
        let chosen = charlex_min(coset.map(|u| mask ^ u), d).expect("0 is always orthogonal");
        if chosen == mask {
            correct += prob;
        }
    }
    Ok(correct)
}

// ---------------------------------------------------------------------------
// Capability specs (structured-text suite files)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseProbSpec {
    pub y: Vec<u8>,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRowSpec {
    pub query: Vec<u8>,
    pub p: f64,
    pub responses: Vec<ResponseProbSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionRowSpec {
    pub context: Vec<u8>,
    pub next: Vec<ResponseProbSpec>,
}

/// Declarative capability description, loadable from suite and run config
/// files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapabilitySpec {
    Tabular {
        name: String,
        query_codec: Codec,
        response_codec: Codec,
        rows: Vec<TableRowSpec>,
    },
    Parity {
        name: String,
        d: u32,
        indices: Vec<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        query_weights: Option<Vec<f64>>,
    },
    Kgram {
        name: String,
        k: usize,
        alphabet: Vec<u8>,
        prefix_len: usize,
        transitions: Vec<TransitionRowSpec>,
    },
}

impl CapabilitySpec {
    pub fn build(&self) -> Result<CapabilityRef> {
        match self {
            CapabilitySpec::Tabular { name, query_codec, response_codec, rows } => {
                let rows = rows
                    .iter()
                    .map(|r| TableRow {
                        query: Query(r.query.clone()),
                        query_prob: r.p,
                        responses: r
                            .responses
                            .iter()
                            .map(|s| (Response(s.y.clone()), s.p))
                            .collect(),
                    })
                    .collect();
                Ok(Arc::new(TabularCapability::new(
                    name.clone(),
                    CodecPair::new(*query_codec, *response_codec),
                    rows,
                )?))
            }
            CapabilitySpec::Parity { name, d, indices, query_weights } => {
                for i in indices {
                    if *i == 0 || *i > *d {
                        return Err(Error::InvalidConfig(format!(
                            "parity index {i} outside 1..={d}"
                        )));
                    }
                }
                let mut cap =
                    ParityCapability::new(name.clone(), *d, ParityCapability::mask_from_indices(indices))?;
                if let Some(w) = query_weights {
                    cap = cap.with_weights(w.clone())?;
                }
                Ok(Arc::new(cap))
            }
            CapabilitySpec::Kgram { name, k, alphabet, prefix_len, transitions } => {
                let map = transitions
                    .iter()
                    .map(|row| {
                        (
                            row.context.clone(),
                            row.next.iter().map(|s| (s.y.first().copied().unwrap_or(0), s.p)).collect(),
                        )
                    })
                    .collect();
                Ok(Arc::new(KGramCapability::new(
                    name.clone(),
                    *k,
                    alphabet.clone(),
                    *prefix_len,
                    map,
                )?))
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            CapabilitySpec::Tabular { name, .. } => name,
            CapabilitySpec::Parity { name, .. } => name,
            CapabilitySpec::Kgram { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub schema_version: u32,
    pub capabilities: Vec<CapabilitySpec>,
}

pub fn load_suite(path: &Path) -> Result<Vec<CapabilityRef>> {
    let text = std::fs::read_to_string(path)?;
    let spec: SuiteSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("suite file {}: {e}", path.display())))?;
    if spec.schema_version != 1 {
        return Err(Error::InvalidConfig(format!(
            "unsupported suite schema_version {}",
            spec.schema_version
        )));
    }
    if spec.capabilities.is_empty() {
        return Err(Error::InvalidConfig("suite file lists no capabilities".into()));
    }
    spec.capabilities.iter().map(|c| c.build()).collect()
}
