//! Learner abstractions for both sides and the experiment driver: disjoint
//! sample draws, training, distinction measurement, and pass-rate
//! aggregation against an (epsilon, delta) contract.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distinction::{decide_distinguish, mc_distinction, Decision, DistinctionEstimate};
use crate::error::{Error, Result};
use crate::random::{RandomSource, StreamRng, TAG_TRIAL};
use crate::types::{
    CapabilityRef, ComputeMeter, EvaluatorRef, ModelRef, ResourceLedger, SamplePair,
};

/// Trains a model from samples. Output must depend only on the samples and
/// the provided randomness stream; compute is reported through the meter.
pub trait ModelLearner: Send + Sync {
    fn name(&self) -> String;

    fn train(
        &self,
        samples: &[SamplePair],
        rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<ModelRef>;

    /// Description length of the hypothesis class when it is finite.
    fn expressivity_bits(&self, _samples: &[SamplePair]) -> Option<f64> {
        None
    }
}

/// Trains an evaluator from samples. Learners that read the trained model
/// artifact instead of learning independently must say so via
/// [`EvaluatorLearner::derives_from_model`]; experiments using them are
/// reported as outside the framework's independence requirements.
pub trait EvaluatorLearner: Send + Sync {
    fn name(&self) -> String;

    fn train(
        &self,
        samples: &[SamplePair],
        rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef>;

    fn derives_from_model(&self) -> bool {
        false
    }

    fn train_with_model(
        &self,
        samples: &[SamplePair],
        _model: &ModelRef,
        rng: &mut StreamRng,
        meter: &mut ComputeMeter,
    ) -> Result<EvaluatorRef> {
        self.train(samples, rng, meter)
    }

    fn expressivity_bits(&self, _samples: &[SamplePair]) -> Option<f64> {
        None
    }
}

/// Draw m model-side and n evaluator-side samples from the capability on
/// two disjoint randomness streams, registering both stream keys with the
/// ledger so disjointness stays auditable.
pub fn draw_disjoint_samples(
    mu: &dyn crate::types::Capability,
    m: u64,
    n: u64,
    src: &RandomSource,
    ledger: &mut ResourceLedger,
) -> (Vec<SamplePair>, Vec<SamplePair>) {
    let model_src = src.child("samples-model", 0);
    let eval_src = src.child("samples-evaluator", 0);
    ledger.record_stream_key(&model_src.key_string());
    ledger.record_stream_key(&eval_src.key_string());

    let mut rng = model_src.rng();
    let s_g: Vec<SamplePair> = (0..m).map(|_| mu.sample(&mut rng)).collect();
    let mut rng = eval_src.rng();
    let s_e: Vec<SamplePair> = (0..n).map(|_| mu.sample(&mut rng)).collect();

    ledger.samples_model += m;
    ledger.samples_evaluator += n;
    (s_g, s_e)
}

/// Contract and budgets for one experiment: the (epsilon, delta) target,
/// sample counts per side, trial count, and estimator settings, over a
/// capability suite.
#[derive(Clone)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Model-side samples per trial.
    pub m: u64,
    /// Evaluator-side samples per trial.
    pub n: u64,
    /// Independent trials per capability.
    pub trials: u64,
    /// Monte Carlo interactions per arm inside each trial.
    pub mc_trials_per_arm: u64,
    /// Joint confidence parameter for the distinction estimate.
    pub alpha: f64,
    pub suite: Vec<CapabilityRef>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} outside (0, 1)",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta {} outside (0, 1)", self.delta)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.mc_trials_per_arm == 0 {
            return Err(Error::InvalidConfig("mc_trials_per_arm must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.suite.is_empty() {
            return Err(Error::InvalidConfig("capability suite is empty".into()));
        }
        Ok(())
    }

    /// Serializable echo of the settings for reports.
    pub fn settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            epsilon: self.epsilon,
            delta: self.delta,
            m: self.m,
            n: self.n,
            trials: self.trials,
            mc_trials_per_arm: self.mc_trials_per_arm,
            alpha: self.alpha,
            suite: self.suite.iter().map(|c| c.name()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub epsilon: f64,
    pub delta: f64,
    pub m: u64,
    pub n: u64,
    pub trials: u64,
    pub mc_trials_per_arm: u64,
    pub alpha: f64,
    pub suite: Vec<String>,
}

/// Everything one trial produced, trained artifacts included.
#[derive(Clone)]
pub struct TrialRun {
    pub model: ModelRef,
    pub evaluator: EvaluatorRef,
    pub estimate: DistinctionEstimate,
    pub decision: Decision,
    pub ledger: ResourceLedger,
}

/// One trial of the experiment: draw disjoint samples, train the model and
/// the evaluator, estimate the distinction, and decide against epsilon. Each
/// stage consumes its own keyed randomness stream under
/// `src.child("trial", trial_index)`.
pub fn pseudointelligence_trial(
    l_g: &dyn ModelLearner,
    l_e: &dyn EvaluatorLearner,
    mu: &CapabilityRef,
    cfg: &ExperimentConfig,
    trial_index: u64,
    src: &RandomSource,
) -> Result<TrialRun> {
    let trial_src = src.child(TAG_TRIAL, trial_index);
    let mut ledger = ResourceLedger::new();
    let (s_g, s_e) = draw_disjoint_samples(mu.as_ref(), cfg.m, cfg.n, &trial_src, &mut ledger);

    let mut meter_g = ComputeMeter::new();
    let mut rng_g = trial_src.child("learn-model", 0).rng();
    let g = l_g.train(&s_g, &mut rng_g, &mut meter_g)?;

    let mut meter_e = ComputeMeter::new();
    let mut rng_e = trial_src.child("learn-evaluator", 0).rng();
    let e = if l_e.derives_from_model() {
        l_e.train_with_model(&s_e, &g, &mut rng_e, &mut meter_e)?
    } else {
        l_e.train(&s_e, &mut rng_e, &mut meter_e)?
    };

    ledger.learner_steps_model = meter_g.steps();
    ledger.learner_steps_evaluator = meter_e.steps();
    ledger.expressivity_bits_model = l_g.expressivity_bits(&s_g);
    ledger.expressivity_bits_evaluator = l_e.expressivity_bits(&s_e);

    let mc_src = trial_src.child("mc", 0);
    let estimate = mc_distinction(
        e.as_ref(),
        g.as_ref(),
        mu,
        cfg.mc_trials_per_arm,
        cfg.alpha,
        &mc_src,
        &mut ledger,
    )?;
    let decision = decide_distinguish(&estimate, cfg.epsilon);
    Ok(TrialRun { model: g, evaluator: e, estimate, decision, ledger })
}

/// One row of the experiment's trial table. A trial that failed to run
/// carries the error text and no decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub capability: String,
    pub trial: u64,
    pub p_hat_model: f64,
    pub p_hat_capability: f64,
    pub dist_hat: f64,
    pub radius: f64,
    pub decision: Option<Decision>,
    pub error: Option<String>,
}

/// Per-capability aggregation of trial outcomes against the contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityReport {
    pub capability: String,
    /// Trials decided cannot-distinguish.
    pub pass_count: u64,
    /// Trials decided distinguishes.
    pub fail_count: u64,
    pub inconclusive_count: u64,
    /// Trials that error out; counted against the verdict like failures.
    pub errored_count: u64,
    pub pass_rate: f64,
    /// pass_rate >= 1 - delta, with inconclusive and errored trials counted
    /// as failures.
    pub verdict_pass: bool,
    /// Mean dist_hat over the trials that ran.
    pub mean_dist_hat: f64,
    pub ledger: ResourceLedger,
}

impl CapabilityReport {
    fn from_counts(
        capability: String,
        trials: u64,
        delta: f64,
        outcomes: &[(Option<Decision>, f64)],
        ledger: ResourceLedger,
    ) -> Self {
        let mut pass = 0u64;
        let mut fail = 0u64;
        let mut inconclusive = 0u64;
        let mut errored = 0u64;
        let mut dist_sum = 0.0;
        let mut ran = 0u64;
        for (decision, dist_hat) in outcomes {
            match decision {
                Some(Decision::CannotDistinguish) => pass += 1,
                Some(Decision::Distinguishes) => fail += 1,
                Some(Decision::Inconclusive) => inconclusive += 1,
                None => errored += 1,
            }
            if decision.is_some() {
                dist_sum += dist_hat;
                ran += 1;
            }
        }
        let pass_rate = pass as f64 / trials as f64;
        CapabilityReport {
            capability,
            pass_count: pass,
            fail_count: fail,
            inconclusive_count: inconclusive,
            errored_count: errored,
            pass_rate,
            // Tolerance absorbs float dust on exact boundaries like 0.8 >= 1-0.2.
            verdict_pass: pass_rate >= (1.0 - delta) - 1e-12,
            mean_dist_hat: if ran > 0 { dist_sum / ran as f64 } else { 0.0 },
            ledger,
        }
    }
}

/// Full experiment output: per-capability verdicts, the trial table, and
/// aggregated resource accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudointelligenceReport {
    pub settings: ExperimentSettings,
    pub model_learner: String,
    pub evaluator_learner: String,
    /// True when the evaluator was derived from the trained model artifact
    /// rather than learned independently.
    pub outside_framework: bool,
    pub capabilities: Vec<CapabilityReport>,
    pub trials: Vec<TrialRecord>,
    /// Every capability met the contract.
    pub all_pass: bool,
    /// Some trials errored and the report covers only what ran.
    pub partial: bool,
    pub ledger: ResourceLedger,
}

/// Run T independent trials per capability with fresh keyed randomness and
/// aggregate pass rates against the contract. Trial errors are recorded in
/// the report (and counted as failures) rather than aborting the run; the
/// report is then flagged partial.
pub fn pseudointelligence_experiment(
    l_g: &dyn ModelLearner,
    l_e: &dyn EvaluatorLearner,
    cfg: &ExperimentConfig,
    master: &RandomSource,
) -> Result<PseudointelligenceReport> {
    cfg.validate()?;

    let jobs: Vec<(usize, u64)> = (0..cfg.suite.len())
        .flat_map(|ci| (0..cfg.trials).map(move |ti| (ci, ti)))
        .collect();
    let runs: Vec<Result<TrialRun>> = jobs
        .par_iter()
        .map(|&(ci, ti)| {
            let cap_src = master.child("capability", ci as u64);
            pseudointelligence_trial(l_g, l_e, &cfg.suite[ci], cfg, ti, &cap_src)
        })
        .collect();

    let mut capabilities = Vec::with_capacity(cfg.suite.len());
    let mut trials = Vec::with_capacity(jobs.len());
    let mut total = ResourceLedger::new();
    let mut partial = false;
    for (ci, mu) in cfg.suite.iter().enumerate() {
        let mut outcomes = Vec::with_capacity(cfg.trials as usize);
        let mut cap_ledger = ResourceLedger::new();
        for ti in 0..cfg.trials {
            let run = &runs[ci * cfg.trials as usize + ti as usize];
            let record = match run {
                Ok(run) => {
                    cap_ledger.merge(&run.ledger);
                    outcomes.push((Some(run.decision), run.estimate.dist_hat));
                    TrialRecord {
                        capability: mu.name(),
                        trial: ti,
                        p_hat_model: run.estimate.p_hat_model,
                        p_hat_capability: run.estimate.p_hat_capability,
                        dist_hat: run.estimate.dist_hat,
                        radius: run.estimate.radius,
                        decision: Some(run.decision),
                        error: None,
                    }
                }
                Err(err) => {
                    partial = true;
                    outcomes.push((None, 0.0));
                    TrialRecord {
                        capability: mu.name(),
                        trial: ti,
                        p_hat_model: 0.0,
                        p_hat_capability: 0.0,
                        dist_hat: 0.0,
                        radius: 0.0,
                        decision: None,
                        error: Some(err.to_string()),
                    }
                }
            };
            trials.push(record);
        }
        total.merge(&cap_ledger);
        capabilities.push(CapabilityReport::from_counts(
            mu.name(),
            cfg.trials,
            cfg.delta,
            &outcomes,
            cap_ledger,
        ));
    }

    let all_pass = capabilities.iter().all(|c| c.verdict_pass);
    Ok(PseudointelligenceReport {
        settings: cfg.settings(),
        model_learner: l_g.name(),
        evaluator_learner: l_e.name(),
        outside_framework: l_e.derives_from_model(),
        capabilities,
        trials,
        all_pass,
        partial,
        ledger: total,
    })
}
