//! The evaluator zoo: static dataset evaluators, adversarially filtered
//! challenge sets, model-derived self-evaluators, and generator/filter
//! model-based evaluators, plus the learner wrappers that plug them into
//! experiments.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::learners::{EvaluatorLearner, ModelLearner};
use crate::random::{RandomSource, StreamRng};
use crate::types::{
    Capability, CapabilityRef, ComputeMeter, Evaluator, EvaluatorRef, EvaluatorSession, Model,
    ModelRef, Query, Response, RoundSpec, SamplePair, SessionStep, Transcript, Verdict,
};

fn uniform_index(len: usize, rng: &mut StreamRng) -> usize {
    rng.gen_range(0..len)
}

/// Total stored payload size in bits.
fn payload_bits(pairs: &[SamplePair]) -> f64 {
    8.0 * pairs
        .iter()
        .map(|p| (p.query.0.len() + p.response.0.len()) as f64)
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Static dataset evaluator

/// Memorizes a sample list, queries one stored pair uniformly at random
/// (duplicates keep their multiplicity), and accepts exactly the stored
/// response.
pub struct StaticDatasetEvaluator {
    name: String,
    pairs: Vec<SamplePair>,
}

impl StaticDatasetEvaluator {
    pub fn new(name: impl Into<String>, pairs: Vec<SamplePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        Ok(StaticDatasetEvaluator { name: name.into(), pairs })
    }

    pub fn pairs(&self) -> &[SamplePair] {
        &self.pairs
    }

    pub fn expressivity_bits(&self) -> f64 {
        (self.pairs.len() as f64).log2() + payload_bits(&self.pairs)
    }
}

struct StaticSession<'a> {
    owner: &'a StaticDatasetEvaluator,
    drawn: usize,
}

impl Evaluator for StaticDatasetEvaluator {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn max_rounds(&self) -> u32 {
        1
    }

    fn session(&self) -> Box<dyn EvaluatorSession + '_> {
        Box::new(StaticSession { owner: self, drawn: 0 })
    }

    fn enumerate_rounds(&self) -> Option<Vec<RoundSpec>> {
        let w = 1.0 / self.pairs.len() as f64;
        Some(
            self.pairs
                .iter()
                .map(|p| RoundSpec {
                    weight: w,
                    query: p.query.clone(),
                    accepted: vec![p.response.clone()],
                })
                .collect(),
        )
    }
}

impl EvaluatorSession for StaticSession<'_> {
    fn next(&mut self, transcript: &Transcript, rng: &mut StreamRng) -> Result<SessionStep> {
        if transcript.is_empty() {
            self.drawn = uniform_index(self.owner.pairs.len(), rng);
            Ok(SessionStep::Ask(self.owner.pairs[self.drawn].query.clone()))
        } else {
            let want = &self.owner.pairs[self.drawn].response;
            let got = &transcript.rounds[0].response;
            Ok(SessionStep::Decide(if want == got { Verdict::Accept } else { Verdict::Reject }))
        }
    }
}

/// Build a static dataset evaluator from memorized samples.
pub fn learn_static_evaluator(samples: &[SamplePair]) -> Result<StaticDatasetEvaluator> {
    StaticDatasetEvaluator::new(format!("static[n={}]", samples.len()), samples.to_vec())
}

// ---------------------------------------------------------------------------
// Repeated-sample evaluator (round sweeps)

/// Draws r stored pairs with replacement, one per round, and accepts only if
/// every response matches. With r = 1 this is exactly the static evaluator.
pub struct RepeatedSampleEvaluator {
    name: String,
    pairs: Vec<SamplePair>,
    rounds: u32,
}

impl RepeatedSampleEvaluator {
    pub fn new(name: impl Into<String>, pairs: Vec<SamplePair>, rounds: u32) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        if rounds == 0 {
            return Err(Error::InvalidConfig("repeated evaluator needs rounds >= 1".into()));
        }
        Ok(RepeatedSampleEvaluator { name: name.into(), pairs, rounds })
    }
}

struct RepeatedSession<'a> {
    owner: &'a RepeatedSampleEvaluator,
    drawn: Vec<usize>,
}

impl Evaluator for RepeatedSampleEvaluator {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn max_rounds(&self) -> u32 {
        self.rounds
    }

    fn session(&self) -> Box<dyn EvaluatorSession + '_> {
        Box::new(RepeatedSession { owner: self, drawn: Vec::new() })
    }

    fn enumerate_rounds(&self) -> Option<Vec<RoundSpec>> {
        if self.rounds != 1 {
            return None;
        }
        let w = 1.0 / self.pairs.len() as f64;
        Some(
            self.pairs
                .iter()
                .map(|p| RoundSpec {
                    weight: w,
                    query: p.query.clone(),
                    accepted: vec![p.response.clone()],
                })
                .collect(),
        )
    }
}

impl EvaluatorSession for RepeatedSession<'_> {
    fn next(&mut self, transcript: &Transcript, rng: &mut StreamRng) -> Result<SessionStep> {
        // Any mismatch so far ends the session early.
        for (i, idx) in self.drawn.iter().enumerate() {
            if transcript.rounds[i].response != self.owner.pairs[*idx].response {
                return Ok(SessionStep::Decide(Verdict::Reject));
            }
        }
        if transcript.len() < self.owner.rounds as usize {
            let idx = uniform_index(self.owner.pairs.len(), rng);
            self.drawn.push(idx);
            Ok(SessionStep::Ask(self.owner.pairs[idx].query.clone()))
        } else {
            Ok(SessionStep::Decide(Verdict::Accept))
        }
    }
}

// ---------------------------------------------------------------------------
// Fixed-verdict evaluator

/// Ignores the black box entirely and returns a fixed verdict after zero
/// rounds. The degenerate end of the zoo: it can never distinguish anything.
pub struct FixedVerdictEvaluator {
    pub verdict: Verdict,
}

struct FixedSession {
    verdict: Verdict,
}

impl Evaluator for FixedVerdictEvaluator {
    fn name(&self) -> String {
        match self.verdict {
            Verdict::Accept => "fixed[accept]".into(),
            Verdict::Reject => "fixed[reject]".into(),
        }
    }

    fn max_rounds(&self) -> u32 {
        0
    }

    fn session(&self) -> Box<dyn EvaluatorSession + '_> {
        Box::new(FixedSession { verdict: self.verdict })
    }

    fn enumerate_rounds(&self) -> Option<Vec<RoundSpec>> {
        Some(Vec::new())
    }
}

impl EvaluatorSession for FixedSession {
    fn next(&mut self, _transcript: &Transcript, _rng: &mut StreamRng) -> Result<SessionStep> {
        Ok(SessionStep::Decide(self.verdict))
    }
}

// ---------------------------------------------------------------------------
// Adversarial filtering

/// Pairs an auxiliary model got wrong, with the erring draws recorded.
#[derive(Debug, Clone)]
pub struct ChallengeSet {
    pub pairs: Vec<SamplePair>,
    /// The auxiliary model's (wrong) response for each surviving pair.
    pub aux_responses: Vec<Response>,
    /// Seed pairs dropped because the auxiliary model answered correctly.
    pub rejected: u64,
}

/// Mutation loop configuration: the hook proposes query variants and the
/// capability relabels them before they can enter the challenge set.
pub struct MutationSpec<'a> {
    pub hook: &'a (dyn Fn(&Query, &mut StreamRng) -> Query + Send + Sync),
    pub relabel: &'a dyn Capability,
    pub max_rounds: u32,
}

/// Keep the seed pairs the auxiliary model errs on. When a mutation spec is
/// given, pairs the model answers correctly are mutated (and relabeled by
/// the capability) up to `max_rounds` times in search of an error.
pub fn adversarial_filter(
    seed: &[SamplePair],
    aux: &dyn Model,
    src: &RandomSource,
    mutation: Option<&MutationSpec<'_>>,
) -> Result<ChallengeSet> {
    if seed.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if let Some(spec) = mutation {
        if spec.max_rounds == 0 {
            return Err(Error::InvalidConfig("mutation loop needs max_rounds >= 1".into()));
        }
    }

    let mut pairs = Vec::new();
    let mut aux_responses = Vec::new();
    let mut rejected = 0u64;
    for (i, pair) in seed.iter().enumerate() {
        let mut rng = src.child("pair", i as u64).rng();
        let aux_y = aux.respond(&pair.query, &mut rng)?;
        if aux_y != pair.response {
            pairs.push(pair.clone());
            aux_responses.push(aux_y);
            continue;
        }
        let mut survived = false;
        if let Some(spec) = mutation {
            let mut candidate = pair.query.clone();
            for _ in 0..spec.max_rounds {
                candidate = (spec.hook)(&candidate, &mut rng);
                let truth = spec.relabel.conditional_sample(&candidate, &mut rng)?;
                let aux_y = aux.respond(&candidate, &mut rng)?;
                if aux_y != truth {
                    pairs.push(SamplePair::new(candidate.clone(), truth));
                    aux_responses.push(aux_y);
                    survived = true;
                    break;
                }
            }
        }
        if !survived {
            rejected += 1;
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyChallengeSet);
    }
    Ok(ChallengeSet { pairs, aux_responses, rejected })
}

/// Filter the seed set against the auxiliary model and memorize what
/// survives.
pub fn learn_adversarial_evaluator(
    seed: &[SamplePair],
    aux: &dyn Model,
    src: &RandomSource,
) -> Result<StaticDatasetEvaluator> {
    let challenge = adversarial_filter(seed, aux, src, None)?;
    StaticDatasetEvaluator::new(
        format!("adversarial[n={}, aux={}]", challenge.pairs.len(), aux.name()),
        challenge.pairs,
    )
}

// ---------------------------------------------------------------------------
// Self-evaluators

/// Where a self-evaluator draws its queries.
pub enum QuerySource {
    List(Vec<Query>),
    Marginal(CapabilityRef),
}

/// Accepts the black box exactly when it reproduces the source model's own
/// response on a drawn query. A randomized source model is re-drawn with the
/// evaluator's coins each session.
pub struct SelfEvaluator {
    name: String,
    model: ModelRef,
    source: QuerySource,
}

impl SelfEvaluator {
    pub fn model(&self) -> &ModelRef {
        &self.model
    }
}

struct SelfSession<'a> {
    owner: &'a SelfEvaluator,
    query: Option<Query>,
}

impl Evaluator for SelfEvaluator {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn max_rounds(&self) -> u32 {
        1
    }

    fn session(&self) -> Box<dyn EvaluatorSession + '_> {
        Box::new(SelfSession { owner: self, query: None })
    }

    fn enumerate_rounds(&self) -> Option<Vec<RoundSpec>> {
        let weighted: Vec<(Query, f64)> = match &self.source {
            QuerySource::List(queries) => {
                let w = 1.0 / queries.len() as f64;
                queries.iter().map(|q| (q.clone(), w)).collect()
            }
            QuerySource::Marginal(mu) => mu.query_marginal()?,
        };
        let mut rounds = Vec::with_capacity(weighted.len());
        for (query, weight) in weighted {
            let dist = crate::distinction::model_point_distribution(self.model.as_ref(), &query)
                .ok()?;
            // Only a point-mass source response gives a well-defined accept set.
            let accepted = match dist.as_slice() {
                [(y, p)] if (p - 1.0).abs() < 1e-12 => vec![y.clone()],
                _ => return None,
            };
            rounds.push(RoundSpec { weight, query, accepted });
        }
        Some(rounds)
    }
}

impl EvaluatorSession for SelfSession<'_> {
    fn next(&mut self, transcript: &Transcript, rng: &mut StreamRng) -> Result<SessionStep> {
        if transcript.is_empty() {
            let query = match &self.owner.source {
                QuerySource::List(queries) => queries[uniform_index(queries.len(), rng)].clone(),
                QuerySource::Marginal(mu) => mu.sample(rng).query,
            };
            self.query = Some(query.clone());
            Ok(SessionStep::Ask(query))
        } else {
            let query = self.query.as_ref().expect("query drawn before the verdict");
            let own = self.owner.model.respond(query, rng)?;
            let got = &transcript.rounds[0].response;
            Ok(SessionStep::Decide(if *got == own { Verdict::Accept } else { Verdict::Reject }))
        }
    }
}

/// Map a model onto its self-evaluator.
pub fn derive_self_evaluator(model: ModelRef, source: QuerySource) -> Result<SelfEvaluator> {
    match &source {
        QuerySource::List(queries) if queries.is_empty() => {
            return Err(Error::EmptySampleSet)
        }
        _ => {}
    }
    Ok(SelfEvaluator { name: format!("self[{}]", model.name()), model, source })
}

// ---------------------------------------------------------------------------
// Model-based evaluator

/// The fixed trigger fed to query generators.
fn trigger() -> Query {
    Query(Vec::new())
}

/// A model that emits queries drawn uniformly from a stored pool when fed
/// the trigger. The simplest template-style generator.
pub struct PoolGenerator {
    pub pool: Vec<Query>,
}

impl Model for PoolGenerator {
    fn name(&self) -> String {
        format!("pool[{}]", self.pool.len())
    }

    fn respond(&self, _x: &Query, rng: &mut StreamRng) -> Result<Response> {
        let q = &self.pool[uniform_index(self.pool.len(), rng)];
        Ok(Response(q.0.clone()))
    }

    fn response_distribution(&self, _x: &Query) -> Option<Vec<(Response, f64)>> {
        let w = 1.0 / self.pool.len() as f64;
        Some(self.pool.iter().map(|q| (Response(q.0.clone()), w)).collect())
    }
}

/// Queries come from a generator model (optionally vetoed by a filter
/// model); the verdict is agreement with a reference predictor.
pub struct ModelBasedEvaluator {
    name: String,
    generator: ModelRef,
    filter: Option<ModelRef>,
    reference: ModelRef,
    budget: u32,
}

struct ModelBasedSession<'a> {
    owner: &'a ModelBasedEvaluator,
    query: Option<Query>,
}

impl Evaluator for ModelBasedEvaluator {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn max_rounds(&self) -> u32 {
        1
    }

    fn session(&self) -> Box<dyn EvaluatorSession + '_> {
        Box::new(ModelBasedSession { owner: self, query: None })
    }

    fn enumerate_rounds(&self) -> Option<Vec<RoundSpec>> {
        let generated =
            crate::distinction::model_point_distribution(self.owner_generator(), &trigger()).ok()?;
        let mut kept: Vec<(Query, f64)> = Vec::new();
        let mut mass = 0.0;
        for (payload, p) in generated {
            let query = Query(payload.0);
            if let Some(filter) = &self.filter {
                let vote = crate::distinction::model_point_distribution(filter.as_ref(), &query)
                    .ok()?;
                let pass = match vote.as_slice() {
                    [(y, w)] if (w - 1.0).abs() < 1e-12 => y.0 == [1],
                    _ => return None,
                };
                if !pass {
                    continue;
                }
            }
            kept.push((query, p));
            mass += p;
        }
        if mass <= 0.0 {
            return None;
        }
        let mut rounds = Vec::with_capacity(kept.len());
        for (query, p) in kept {
            let dist =
                crate::distinction::model_point_distribution(self.reference.as_ref(), &query).ok()?;
            let accepted = match dist.as_slice() {
                [(y, w)] if (w - 1.0).abs() < 1e-12 => vec![y.clone()],
                _ => return None,
            };
            rounds.push(RoundSpec { weight: p / mass, query, accepted });
        }
        Some(rounds)
    }
}

impl ModelBasedEvaluator {
    fn owner_generator(&self) -> &dyn Model {
        self.generator.as_ref()
    }
}

impl EvaluatorSession for ModelBasedSession<'_> {
    fn next(&mut self, transcript: &Transcript, rng: &mut StreamRng) -> Result<SessionStep> {
        if transcript.is_empty() {
            for _ in 0..self.owner.budget {
                let payload = self.owner.generator.respond(&trigger(), rng)?;
                let query = Query(payload.0);
                if let Some(filter) = &self.owner.filter {
                    if filter.respond(&query, rng)?.0 != [1] {
                        continue;
                    }
                }
                self.query = Some(query.clone());
                return Ok(SessionStep::Ask(query));
            }
            Err(Error::GeneratorExhausted { budget: self.owner.budget })
        } else {
            let query = self.query.as_ref().expect("query drawn before the verdict");
            let want = self.owner.reference.respond(query, rng)?;
            let got = &transcript.rounds[0].response;
            Ok(SessionStep::Decide(if *got == want { Verdict::Accept } else { Verdict::Reject }))
        }
    }
}

/// Build a model-based evaluator: queries from `generator` (vetoed by
/// `filter` when given, retrying within `budget`), verdict by agreement with
/// a memorizer reference trained on the samples.
pub fn learn_modelbased_evaluator(
    generator: ModelRef,
    filter: Option<ModelRef>,
    samples: &[SamplePair],
    budget: u32,
) -> Result<ModelBasedEvaluator> {
    if budget == 0 {
        return Err(Error::InvalidConfig("generation budget must be >= 1".into()));
    }
    let reference = Arc::new(crate::capabilities::learn_memorizer(samples, Response(Vec::new())));
    Ok(ModelBasedEvaluator {
        name: format!("modelbased[gen={}, n={}]", generator.name(), samples.len()),
        generator,
        filter,
        reference,
        budget,
    })
}

// ---------------------------------------------------------------------------
// Evaluator learners

/// Memorize the evaluator-side samples into a static dataset evaluator.
pub struct StaticEvaluatorLearner;

impl EvaluatorLearner for StaticEvaluatorLearner {
    fn name(&self) -> String {
        "static".into()
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        meter.step(samples.len() as u64);
        Ok(Arc::new(learn_static_evaluator(samples)?))
    }

    fn expressivity_bits(&self, samples: &[SamplePair]) -> Option<f64> {
        if samples.is_empty() {
            return None;
        }
        Some((samples.len() as f64).log2() + payload_bits(samples))
    }
}

/// Same storage as the static learner but spread over a fixed number of
/// interaction rounds.
pub struct RepeatedEvaluatorLearner {
    pub rounds: u32,
}

impl EvaluatorLearner for RepeatedEvaluatorLearner {
    fn name(&self) -> String {
        format!("repeated[r={}]", self.rounds)
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        meter.step(samples.len() as u64);
        Ok(Arc::new(RepeatedSampleEvaluator::new(
            format!("repeated[n={}, r={}]", samples.len(), self.rounds),
            samples.to_vec(),
            self.rounds,
        )?))
    }

    fn expressivity_bits(&self, samples: &[SamplePair]) -> Option<f64> {
        StaticEvaluatorLearner.expressivity_bits(samples)
    }
}

/// Train an auxiliary model on the samples, filter the same samples against
/// it, and memorize the survivors.
pub struct AdversarialEvaluatorLearner {
    pub aux_learner: Arc<dyn ModelLearner>,
}

impl EvaluatorLearner for AdversarialEvaluatorLearner {
    fn name(&self) -> String {
        format!("adversarial[aux={}]", self.aux_learner.name())
    }

    fn train(
        &self,
        samples: &[SamplePair],
        rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        let aux = self.aux_learner.train(samples, rng, meter)?;
        // The filter draws its own coins from a stream keyed off this one.
        let filter_src = RandomSource::new(rng.gen());
        meter.step(samples.len() as u64);
        Ok(Arc::new(learn_adversarial_evaluator(samples, aux.as_ref(), &filter_src)?))
    }
}

/// Trains a fresh model on the evaluator-side samples and derives its
/// self-evaluator; the framework-compliant way to get a self-evaluator.
pub struct SelfEvaluatorLearner {
    pub model_learner: Arc<dyn ModelLearner>,
}

impl EvaluatorLearner for SelfEvaluatorLearner {
    fn name(&self) -> String {
        format!("self[{}]", self.model_learner.name())
    }

    fn train(
        &self,
        samples: &[SamplePair],
        rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        if samples.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        let model = self.model_learner.train(samples, rng, meter)?;
        let queries = samples.iter().map(|p| p.query.clone()).collect();
        Ok(Arc::new(derive_self_evaluator(model, QuerySource::List(queries))?))
    }

    fn expressivity_bits(&self, samples: &[SamplePair]) -> Option<f64> {
        self.model_learner.expressivity_bits(samples)
    }
}

/// The anti-pattern: reuses the already-trained model as the evaluator's
/// reference and reads the model's own training queries out of the trained
/// artifact. Experiments that use it are flagged as outside the framework's
/// independence requirements.
pub struct SharedDerivationSelfEvaluatorLearner;

impl EvaluatorLearner for SharedDerivationSelfEvaluatorLearner {
    fn name(&self) -> String {
        "self[shared-derivation]".into()
    }

    fn train(
        &self,
        _samples: &[SamplePair],
        _rng: &mut StreamRng,
        _meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        Err(Error::InvalidConfig(
            "shared-derivation evaluator needs the trained model artifact".into(),
        ))
    }

    fn derives_from_model(&self) -> bool {
        true
    }

    fn train_with_model(
        &self,
        _samples: &[SamplePair],
        model: &ModelRef,
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        let queries = model.training_queries().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "model {} exposes no training queries to derive from",
                model.name()
            ))
        })?;
        meter.step(queries.len() as u64);
        Ok(Arc::new(derive_self_evaluator(model.clone(), QuerySource::List(queries))?))
    }
}

/// Ignores its samples and emits a fixed-verdict evaluator; the degenerate
/// baseline for contract sanity checks.
pub struct FixedVerdictEvaluatorLearner {
    pub verdict: Verdict,
}

impl EvaluatorLearner for FixedVerdictEvaluatorLearner {
    fn name(&self) -> String {
        match self.verdict {
            Verdict::Accept => "fixed[accept]".into(),
            Verdict::Reject => "fixed[reject]".into(),
        }
    }

    fn train(
        &self,
        _samples: &[SamplePair],
        _rng: &mut StreamRng,
        _meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        Ok(Arc::new(FixedVerdictEvaluator { verdict: self.verdict }))
    }

    fn expressivity_bits(&self, _samples: &[SamplePair]) -> Option<f64> {
        Some(1.0)
    }
}

/// Pool-generator model-based evaluator over the evaluator-side samples; no
/// filter, memorizer reference.
pub struct ModelBasedEvaluatorLearner {
    pub budget: u32,
}

impl EvaluatorLearner for ModelBasedEvaluatorLearner {
    fn name(&self) -> String {
        "modelbased".into()
    }

    fn train(
        &self,
        samples: &[SamplePair],
        _rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        if samples.is_empty() {
            return Err(Error::EmptySampleSet);
        }
        meter.step(samples.len() as u64);
        let generator = Arc::new(PoolGenerator {
            pool: samples.iter().map(|p| p.query.clone()).collect(),
        });
        Ok(Arc::new(learn_modelbased_evaluator(generator, None, samples, 1)?))
    }
}
