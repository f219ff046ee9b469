//! The distinction statistic |Pr[e accepts g] − Pr[e accepts μ]|: Monte
//! Carlo estimation with a confidence radius, an exact oracle for small
//! enumerable instances, the three-valued decision rule, and the
//! non-adaptive special case against uniform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interact::{capability_as_blackbox, run_interaction};
use crate::random::{RandomSource, ARM_CAPABILITY, ARM_MODEL, TAG_ARM, TAG_TRIAL};
use crate::types::{
    check_normalized, Capability, CapabilityRef, Evaluator, Model, Query, Response,
    ResourceLedger,
};

/// Two accept-probability estimates and their absolute difference, with a
/// two-sided confidence radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctionEstimate {
    pub p_hat_model: f64,
    pub p_hat_capability: f64,
    pub dist_hat: f64,
    pub radius: f64,
    pub trials_per_arm: u64,
    pub alpha: f64,
}

/// Confidence radius for the difference of two arm estimates at joint
/// confidence 1 − alpha: each arm gets a two-sided Hoeffding bound at
/// alpha/2, and the two deviations add. Capped at 1 since the distinction
/// statistic lives in [0, 1].
pub fn hoeffding_radius(trials_per_arm: u64, alpha: f64) -> f64 {
    let n = trials_per_arm as f64;
    let raw = 2.0 * ((4.0 / alpha).ln() / (2.0 * n)).sqrt();
    raw.min(1.0)
}

/// Outcome of comparing a distinction estimate against a threshold ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Distinguishes,
    CannotDistinguish,
    Inconclusive,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Distinguishes => "distinguishes",
            Decision::CannotDistinguish => "cannot_distinguish",
            Decision::Inconclusive => "inconclusive",
        }
    }
}

/// Estimate the distinction statistic by running `trials_per_arm` fresh
/// interactions against the model and against the capability oracle.
///
/// Trial i of the model arm draws its coins from
/// `master.child("arm", 0).child("trial", i)`; the capability arm uses arm
/// index 1. Every interaction gets a fresh session and fresh coins, so the
/// estimate is a mean of independent Bernoulli draws and the Hoeffding
/// radius applies.
pub fn mc_distinction(
    e: &dyn Evaluator,
    g: &dyn Model,
    mu: &CapabilityRef,
    trials_per_arm: u64,
    alpha: f64,
    master: &RandomSource,
    ledger: &mut ResourceLedger,
) -> Result<DistinctionEstimate> {
    if trials_per_arm == 0 {
        return Err(Error::InvalidConfig("trials_per_arm must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside (0, 1)")));
    }

    let model_arm = master.child(TAG_ARM, ARM_MODEL);
    let mut model_accepts = 0u64;
    for i in 0..trials_per_arm {
        let (verdict, _) = run_interaction(e, g, &model_arm.child(TAG_TRIAL, i), ledger)?;
        model_accepts += u64::from(verdict.accepts());
    }

    let oracle = capability_as_blackbox(mu.clone());
    let capability_arm = master.child(TAG_ARM, ARM_CAPABILITY);
    let mut capability_accepts = 0u64;
    for i in 0..trials_per_arm {
        let (verdict, _) =
            run_interaction(e, oracle.as_ref(), &capability_arm.child(TAG_TRIAL, i), ledger)?;
        capability_accepts += u64::from(verdict.accepts());
    }

    let n = trials_per_arm as f64;
    let p_hat_model = model_accepts as f64 / n;
    let p_hat_capability = capability_accepts as f64 / n;
    Ok(DistinctionEstimate {
        p_hat_model,
        p_hat_capability,
        dist_hat: (p_hat_model - p_hat_capability).abs(),
        radius: hoeffding_radius(trials_per_arm, alpha),
        trials_per_arm,
        alpha,
    })
}

/// Exact response distribution of a model at one query, for enumeration
/// work: an explicit closed form when the model provides one, else a point
/// mass for deterministic models.
pub(crate) fn model_point_distribution(g: &dyn Model, x: &Query) -> Result<Vec<(Response, f64)>> {
    if let Some(dist) = g.response_distribution(x) {
        return Ok(dist);
    }
    if g.is_deterministic() {
        let mut rng = RandomSource::new(0).rng();
        return Ok(vec![(g.respond(x, &mut rng)?, 1.0)]);
    }
    Err(Error::NotEnumerable(format!(
        "model {} is randomized and exposes no response distribution",
        g.name()
    )))
}

/// Compute the distinction statistic exactly by enumerating the evaluator's
/// single-round table against the capability's joint table. Serves as the
/// brute-force oracle the Monte Carlo engine is validated against.
pub fn exact_distinction(e: &dyn Evaluator, g: &dyn Model, mu: &dyn Capability) -> Result<f64> {
    let rounds = e
        .enumerate_rounds()
        .ok_or_else(|| Error::NotEnumerable(format!("evaluator {} has no round table", e.name())))?;
    if mu.enumerate().is_none() {
        return Err(Error::NotEnumerable(format!(
            "capability {} has no joint table",
            mu.name()
        )));
    }
    if !rounds.is_empty() {
        check_normalized(rounds.iter().map(|r| r.weight), 1e-9, "evaluator round weights")?;
    }

    let mut signed = 0.0;
    for round in &rounds {
        let model_dist = model_point_distribution(g, &round.query)?;
        let capability_dist = mu
            .conditional_distribution(&round.query)
            .ok_or_else(|| Error::UnsupportedQuery(round.query.hex()))?;
        let p_model: f64 = model_dist
            .iter()
            .filter(|(y, _)| round.accepted.contains(y))
            .map(|(_, p)| p)
            .sum();
        let p_capability: f64 = capability_dist
            .iter()
            .filter(|(y, _)| round.accepted.contains(y))
            .map(|(_, p)| p)
            .sum();
        signed += round.weight * (p_model - p_capability);
    }
    Ok(signed.abs())
}

/// Three-valued comparison of an estimate against ε: `Distinguishes` when
/// the whole confidence interval clears ε, `CannotDistinguish` when it sits
/// at or below ε, `Inconclusive` when it straddles the threshold (raise the
/// trial count to shrink the radius).
pub fn decide_distinguish(est: &DistinctionEstimate, epsilon: f64) -> Decision {
    if est.dist_hat - est.radius > epsilon {
        Decision::Distinguishes
    } else if est.dist_hat + est.radius <= epsilon {
        Decision::CannotDistinguish
    } else {
        Decision::Inconclusive
    }
}

/// Explicit probability table over a finite outcome space 0..k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidConfig("distribution over empty space".into()));
        }
        check_normalized(probs.iter().copied(), 1e-12, "finite distribution")?;
        Ok(FiniteDistribution { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("distribution over empty space".into()));
        }
        Ok(FiniteDistribution {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Non-adaptive accept/reject predicate over the same outcome space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distinguisher {
    pub name: String,
    pub accepts: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistinguisherClass {
    pub members: Vec<Distinguisher>,
}

/// Maximum advantage any class member gets telling the distribution from
/// uniform, with the argmax member (first wins ties). This is the
/// non-adaptive, single-query special case of the distinction statistic.
pub fn pseudorandom_advantage(
    p: &FiniteDistribution,
    class: &DistinguisherClass,
) -> Result<(f64, Distinguisher)> {
    if class.members.is_empty() {
        return Err(Error::EmptyClass);
    }
    let k = p.len();
    let q = 1.0 / k as f64;
    let mut best: Option<(f64, usize)> = None;
    for (i, d) in class.members.iter().enumerate() {
        if d.accepts.len() != k {
            return Err(Error::InvalidConfig(format!(
                "distinguisher {} covers {} outcomes, distribution has {}",
                d.name,
                d.accepts.len(),
                k
            )));
        }
        let advantage: f64 = d
            .accepts
            .iter()
            .zip(p.probs())
            .filter(|(a, _)| **a)
            .map(|(_, pi)| pi - q)
            .sum::<f64>()
            .abs();
        if best.map_or(true, |(b, _)| advantage > b) {
            best = Some((advantage, i));
        }
    }
    let (advantage, index) = best.expect("non-empty class");
    Ok((advantage, class.members[index].clone()))
}
