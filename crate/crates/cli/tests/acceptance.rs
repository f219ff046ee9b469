//! End-to-end acceptance gauntlet. Each test covers one shipped claim and
//! prints a single `[criterion N] PASS` line with the numbers it verified,
//! so a full run reads as a scorecard.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write as _};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use pseudint::capabilities::{
    learn_memorizer, learn_parity, load_suite, ConstantLearner, ConstantModel, MemorizerLearner,
    ParityCapability, ParityLearner, TableRow, TabularCapability,
};
use pseudint::distinction::{
    pseudorandom_advantage, Distinguisher, DistinguisherClass, FiniteDistribution,
};
use pseudint::remote::{connect_model, serve_on_listener};
use pseudint::zoo::{
    derive_self_evaluator, learn_adversarial_evaluator, learn_static_evaluator,
    AdversarialEvaluatorLearner, FixedVerdictEvaluatorLearner, ModelBasedEvaluatorLearner,
    QuerySource, RepeatedEvaluatorLearner, SelfEvaluatorLearner,
    SharedDerivationSelfEvaluatorLearner, StaticEvaluatorLearner,
};
use pseudint::{
    capability_as_blackbox, decide_distinguish, exact_distinction, mc_distinction,
    pseudointelligence_experiment, pseudointelligence_trial, Capability, CapabilityRef, Codec,
    CodecPair, ComputeMeter, Decision, Error, EvaluatorLearner, EvaluatorRef, ExperimentConfig,
    Model, Query, RandomSource, ResourceLedger, Response, SamplePair, Verdict,
};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped_suite() -> Vec<CapabilityRef> {
    load_suite(&configs_dir().join("suite_desk.json")).expect("shipped suite loads")
}

fn draw(mu: &dyn Capability, k: usize, src: &RandomSource) -> Vec<SamplePair> {
    let mut rng = src.rng();
    (0..k).map(|_| mu.sample(&mut rng)).collect()
}

fn pair(q: &[u8], y: &[u8]) -> SamplePair {
    SamplePair::new(Query(q.to_vec()), Response(y.to_vec()))
}

/// Two queries, 0.9/0.1 marginal, deterministic labels equal to the query.
fn biased_cap() -> CapabilityRef {
    Arc::new(
        TabularCapability::new(
            "biased",
            CodecPair::new(Codec::Bits, Codec::Bits),
            vec![
                TableRow {
                    query: Query(vec![0]),
                    query_prob: 0.9,
                    responses: vec![(Response(vec![0]), 1.0)],
                },
                TableRow {
                    query: Query(vec![1]),
                    query_prob: 0.1,
                    responses: vec![(Response(vec![1]), 1.0)],
                },
            ],
        )
        .unwrap(),
    )
}

/// Sixteen uniform queries; six carry label 1, ten carry label 0.
fn sixteen_cap() -> CapabilityRef {
    let rows = (0u8..16)
        .map(|i| TableRow {
            query: Query(vec![i]),
            query_prob: 1.0 / 16.0,
            responses: vec![(Response(vec![u8::from(i < 6)]), 1.0)],
        })
        .collect();
    Arc::new(
        TabularCapability::new("sixteen", CodecPair::new(Codec::Tokens, Codec::Bits), rows)
            .unwrap(),
    )
}

fn blank_memorizer() -> Arc<dyn Model> {
    Arc::new(learn_memorizer(&[], Response(vec![0])))
}

// ---------------------------------------------------------------------------
// Criterion 1: an evaluator can never tell the capability from itself.

#[test]
fn acceptance_01_identity_law() {
    let t0 = Instant::now();
    let suite = shipped_suite();
    let mut combos: Vec<(String, CapabilityRef, EvaluatorRef)> = Vec::new();
    for (ci, mu) in suite.iter().enumerate() {
        let train_src = RandomSource::new(0xA110).child("cap", ci as u64);
        let samples = draw(mu.as_ref(), 16, &train_src.child("samples", 0));
        let default = Response(mu.codec().response.zero_value());
        let learners: Vec<Arc<dyn EvaluatorLearner>> = vec![
            Arc::new(StaticEvaluatorLearner),
            Arc::new(RepeatedEvaluatorLearner { rounds: 1 }),
            Arc::new(RepeatedEvaluatorLearner { rounds: 2 }),
            Arc::new(AdversarialEvaluatorLearner {
                aux_learner: Arc::new(ConstantLearner { response_codec: mu.codec().response }),
            }),
            Arc::new(SelfEvaluatorLearner {
                model_learner: Arc::new(MemorizerLearner { default: default.clone() }),
            }),
            Arc::new(FixedVerdictEvaluatorLearner { verdict: Verdict::Accept }),
            Arc::new(FixedVerdictEvaluatorLearner { verdict: Verdict::Reject }),
            Arc::new(ModelBasedEvaluatorLearner { budget: 8 }),
        ];
        for (li, learner) in learners.iter().enumerate() {
            let mut rng = train_src.child("learn", li as u64).rng();
            let mut meter = ComputeMeter::new();
            let e = learner
                .train(&samples, &mut rng, &mut meter)
                .unwrap_or_else(|err| panic!("training {} on {}: {err}", learner.name(), mu.name()));
            combos.push((format!("{}/{}", mu.name(), learner.name()), mu.clone(), e));
        }
    }

    let mut exact_checked = 0usize;
    for (label, mu, e) in &combos {
        let oracle = capability_as_blackbox(mu.clone());
        match exact_distinction(e.as_ref(), oracle.as_ref(), mu.as_ref()) {
            Ok(v) => {
                assert_eq!(v.to_bits(), 0f64.to_bits(), "exact identity broken for {label}: {v}");
                exact_checked += 1;
            }
            Err(Error::NotEnumerable(_)) => {}
            Err(err) => panic!("exact distinction failed for {label}: {err}"),
        }
    }
    assert!(exact_checked >= 24, "only {exact_checked} combos were enumerable");

    let runs = 1000usize;
    let mut within = 0usize;
    for r in 0..runs {
        let (_, mu, e) = &combos[r % combos.len()];
        let oracle = capability_as_blackbox(mu.clone());
        let master = RandomSource::new(0xE0_0000 + r as u64);
        let mut ledger = ResourceLedger::default();
        let est =
            mc_distinction(e.as_ref(), oracle.as_ref(), mu, 256, 0.01, &master, &mut ledger)
                .unwrap();
        if est.dist_hat <= est.radius {
            within += 1;
        }
    }
    assert!(within >= 990, "only {within}/{runs} identity runs stayed within the radius");

    println!(
        "[criterion 1] PASS identity law: {exact_checked} enumerable evaluator/capability pairs \
         at exact 0, {within}/{runs} Monte Carlo runs within radius ({:.2?})",
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: the Monte Carlo estimator tracks the exact statistic.

#[test]
fn acceptance_02_estimator_matches_exact_oracle() {
    let t0 = Instant::now();
    let mut scenarios: Vec<(String, CapabilityRef, Arc<dyn Model>, EvaluatorRef, f64)> =
        Vec::new();

    // Pinned shortcut instance: the model memorizes nothing and the
    // evaluator probes in marginal proportion, so the rare query is the only
    // disagreement and the exact statistic is 0.1.
    {
        let mu = biased_cap();
        let mut pairs = vec![pair(&[0], &[0]); 9];
        pairs.push(pair(&[1], &[1]));
        let e: EvaluatorRef = Arc::new(learn_static_evaluator(&pairs).unwrap());
        let g = blank_memorizer();
        let exact = exact_distinction(e.as_ref(), g.as_ref(), mu.as_ref()).unwrap();
        assert!((exact - 0.1).abs() < 1e-12, "shortcut exact {exact} != 0.1");
        scenarios.push(("shortcut-0.1".into(), mu, g, e, exact));
    }

    // Pinned adversarial instance: filtering against a constant auxiliary
    // keeps only the pair the blank model always misses, so exact dist is 1.
    {
        let mu = biased_cap();
        let seed_pairs = vec![pair(&[0], &[0]), pair(&[1], &[1])];
        let aux = ConstantModel::new(Response(vec![0]));
        let e: EvaluatorRef = Arc::new(
            learn_adversarial_evaluator(&seed_pairs, &aux, &RandomSource::new(9)).unwrap(),
        );
        let g = blank_memorizer();
        let exact = exact_distinction(e.as_ref(), g.as_ref(), mu.as_ref()).unwrap();
        assert_eq!(exact.to_bits(), 1f64.to_bits(), "adversarial exact {exact} != 1.0");
        scenarios.push(("adversarial-1.0".into(), mu, g, e, exact));
    }

    // Randomized tabular scenarios spanning the [0, 1] range.
    for idx in 0..20u64 {
        let src = RandomSource::new(0xC2_0000 + idx);
        let mut rng = src.child("gen", 0).rng();
        let q_count = 2 + rng.gen_range(0..4) as usize;
        let mut weights: Vec<f64> = (0..q_count).map(|_| rng.gen_range(1..=8) as f64).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let rows = weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let r_count = 1 + rng.gen_range(0..3) as usize;
                let mut rw: Vec<f64> = (0..r_count).map(|_| rng.gen_range(1..=8) as f64).collect();
                let rt: f64 = rw.iter().sum();
                for v in &mut rw {
                    *v /= rt;
                }
                TableRow {
                    query: Query(vec![i as u8]),
                    query_prob: *w,
                    responses: rw
                        .iter()
                        .enumerate()
                        .map(|(j, p)| (Response(vec![j as u8]), *p))
                        .collect(),
                }
            })
            .collect();
        let mu: CapabilityRef = Arc::new(
            TabularCapability::new(
                format!("rand-{idx}"),
                CodecPair::new(Codec::Tokens, Codec::Tokens),
                rows,
            )
            .unwrap(),
        );
        let m = ((idx % 4) * 3) as usize;
        let model_samples = draw(mu.as_ref(), m, &src.child("train-model", 0));
        let g: Arc<dyn Model> = Arc::new(learn_memorizer(&model_samples, Response(vec![0])));
        let eval_samples = draw(mu.as_ref(), 10, &src.child("train-eval", 0));
        let e: EvaluatorRef = Arc::new(learn_static_evaluator(&eval_samples).unwrap());
        let exact = exact_distinction(e.as_ref(), g.as_ref(), mu.as_ref()).unwrap();
        assert!((0.0..=1.0).contains(&exact));
        scenarios.push((format!("rand-{idx}"), mu, g, e, exact));
    }

    let runs_per = 5u64;
    let mut runs = 0usize;
    let mut violations = Vec::new();
    for (si, (label, mu, g, e, exact)) in scenarios.iter().enumerate() {
        for j in 0..runs_per {
            let master = RandomSource::new(0xD15C_0000 + si as u64 * 31 + j);
            let mut ledger = ResourceLedger::default();
            let est =
                mc_distinction(e.as_ref(), g.as_ref(), mu, 10_000, 0.01, &master, &mut ledger)
                    .unwrap();
            runs += 1;
            if (est.dist_hat - exact).abs() > est.radius {
                violations.push(format!(
                    "{label}: |{:.4} - {exact:.4}| > {:.4}",
                    est.dist_hat, est.radius
                ));
            }
        }
    }
    assert!(
        violations.len() <= runs / 100,
        "estimator missed the exact value too often: {violations:?}"
    );

    println!(
        "[criterion 2] PASS estimator agreement: {} scenarios x {runs_per} runs, {}/{runs} \
         within radius of the exact statistic ({:.2?})",
        scenarios.len(),
        runs - violations.len(),
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: the parity experiment matches first-principles recovery rates.

/// Probability that Gaussian elimination over m uniform samples pins every
/// set bit of `mask`. The learner forces free columns to zero, so the mask
/// is recovered exactly when each of its set bits is the leading bit of
/// some vector in the sample span. Dynamic program over span states.
fn parity_recovery_probability(d: u32, mask: u64, m: u64) -> f64 {
    let space = 1u64 << d;
    let mut dist: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    dist.insert(vec![0], 1.0);
    for _ in 0..m {
        let mut next: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (span, p) in &dist {
            let share = p / space as f64;
            for x in 0..space {
                if span.binary_search(&x).is_ok() {
                    *next.entry(span.clone()).or_insert(0.0) += share;
                } else {
                    let mut grown: Vec<u64> = span.iter().flat_map(|&v| [v, v ^ x]).collect();
                    grown.sort_unstable();
                    grown.dedup();
                    *next.entry(grown).or_insert(0.0) += share;
                }
            }
        }
        dist = next;
    }
    dist.iter()
        .filter(|(span, _)| {
            let leads: BTreeSet<u32> =
                span.iter().filter(|&&v| v != 0).map(|&v| 63 - v.leading_zeros()).collect();
            (0..d).filter(|b| mask >> b & 1 == 1).all(|b| leads.contains(&b))
        })
        .map(|(_, p)| p)
        .sum()
}

/// Exhaustive ground truth for tiny m: run the actual solver on every
/// ordered sample tuple and count exact recoveries.
fn parity_recovery_exhaustive(mu: &dyn Capability, d: u32, m: u32) -> f64 {
    let table = mu.enumerate().unwrap();
    let space = table.len();
    let mut rng = RandomSource::new(0).rng();
    let mut recovered = 0u64;
    let tuples = (space as u64).pow(m);
    for t in 0..tuples {
        let mut samples = Vec::with_capacity(m as usize);
        let mut rest = t;
        for _ in 0..m {
            samples.push(table[(rest % space as u64) as usize].0.clone());
            rest /= space as u64;
        }
        let mut meter = ComputeMeter::new();
        let model = learn_parity(&samples, d, &mut meter).unwrap();
        let ok = table
            .iter()
            .all(|(p, _)| model.respond(&p.query, &mut rng).unwrap() == p.response);
        if ok {
            recovered += 1;
        }
    }
    recovered as f64 / tuples as f64
}

#[test]
fn acceptance_03_parity_experiment_matches_theory() {
    let t0 = Instant::now();
    let mask = 0b0101u64;
    let mu: CapabilityRef = Arc::new(ParityCapability::new("parity-acc", 4, mask).unwrap());

    // Validate the dynamic program against the solver itself on all sample
    // tuples of size 2 and 3, then pin the size-2 value in closed form.
    let p2 = parity_recovery_probability(4, mask, 2);
    assert!((p2 - 3.0 / 64.0).abs() < 1e-12, "size-2 recovery {p2} != 3/64");
    for m in [2u32, 3] {
        let dp = parity_recovery_probability(4, mask, u64::from(m));
        let exhaustive = parity_recovery_exhaustive(mu.as_ref(), 4, m);
        assert!(
            (dp - exhaustive).abs() < 1e-12,
            "span program {dp} disagrees with exhaustive solver runs {exhaustive} at m={m}"
        );
    }
    let p12 = parity_recovery_probability(4, mask, 12);
    assert!(p12 > 0.99 && p12 < 1.0, "unexpected recovery probability {p12} at m=12");

    let base = ExperimentConfig {
        epsilon: 0.1,
        delta: 0.2,
        m: 12,
        n: 32,
        trials: 200,
        mc_trials_per_arm: 1200,
        alpha: 0.05,
        suite: vec![mu.clone()],
    };
    let rich = pseudointelligence_experiment(
        &ParityLearner { d: 4 },
        &StaticEvaluatorLearner,
        &base,
        &RandomSource::new(0x9A17),
    )
    .unwrap();
    let rate_rich = rich.capabilities[0].pass_rate;
    assert!(rich.capabilities[0].verdict_pass, "m=12 run should meet the contract");
    assert!(rate_rich >= 0.95, "m=12 pass rate {rate_rich} below 0.95");
    assert!(
        (rate_rich - p12).abs() <= 0.02,
        "m=12 pass rate {rate_rich} strays from predicted {p12}"
    );

    let starved = ExperimentConfig { m: 2, ..base };
    let poor = pseudointelligence_experiment(
        &ParityLearner { d: 4 },
        &StaticEvaluatorLearner,
        &starved,
        &RandomSource::new(0x9A17),
    )
    .unwrap();
    let rate_poor = poor.capabilities[0].pass_rate;
    assert!(!poor.capabilities[0].verdict_pass, "m=2 run should fail the contract");
    assert!(rate_poor <= 0.5, "m=2 pass rate {rate_poor} above 0.5");
    assert!(
        (rate_poor - p2).abs() <= 0.06,
        "m=2 pass rate {rate_poor} strays from predicted {p2}"
    );

    println!(
        "[criterion 3] PASS parity learning curve: pass rate {rate_rich:.3} at m=12 \
         (predicted {p12:.4}), {rate_poor:.3} at m=2 (predicted {p2:.4}) ({:.2?})",
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: self-evaluation that shares the model's derivation is inert
// and gets flagged; an independently derived evaluator exposes the gap.

#[test]
fn acceptance_04_shared_derivation_is_flagged_and_blind() {
    let t0 = Instant::now();
    let mu = sixteen_cap();
    let learner = MemorizerLearner { default: Response(vec![0]) };
    let cfg = ExperimentConfig {
        epsilon: 0.3,
        delta: 0.2,
        m: 12,
        n: 6,
        trials: 20,
        mc_trials_per_arm: 400,
        alpha: 0.05,
        suite: vec![mu.clone()],
    };
    let report = pseudointelligence_experiment(
        &learner,
        &SharedDerivationSelfEvaluatorLearner,
        &cfg,
        &RandomSource::new(0x5E1F),
    )
    .unwrap();
    assert!(report.outside_framework, "shared derivation must be flagged");
    assert!(report.all_pass, "the blind evaluator should wave everything through");
    assert_eq!(report.trials.len(), 20);
    for trial in &report.trials {
        assert!(trial.error.is_none(), "trial {} errored: {:?}", trial.trial, trial.error);
        assert_eq!(
            trial.dist_hat.to_bits(),
            0f64.to_bits(),
            "shared-derivation trial {} saw dist {}",
            trial.trial,
            trial.dist_hat
        );
        assert_eq!(trial.decision, Some(Decision::CannotDistinguish));
    }

    // The blindness is exact, not a sampling accident: the trained pair from
    // a trial has distinction exactly zero.
    let run = pseudointelligence_trial(
        &learner,
        &SharedDerivationSelfEvaluatorLearner,
        &mu,
        &cfg,
        0,
        &RandomSource::new(0x5E1F).child("capability", 0),
    )
    .unwrap();
    let exact_shared =
        exact_distinction(run.evaluator.as_ref(), run.model.as_ref(), mu.as_ref()).unwrap();
    assert_eq!(exact_shared.to_bits(), 0f64.to_bits());

    // An evaluator derived from independent data sees what the shared one
    // cannot: the blank model misses every label-1 query, 6 of 16.
    let g = blank_memorizer();
    let fresh = draw(mu.as_ref(), 256, &RandomSource::new(0xFE11).child("fresh", 0));
    let covered = (0u8..16).all(|i| fresh.iter().any(|p| p.query == Query(vec![i])));
    assert!(covered, "fresh draw missed a query; pick a different sampling seed");
    let reference: Arc<dyn Model> = Arc::new(learn_memorizer(&fresh, Response(vec![0])));
    let independent =
        derive_self_evaluator(reference, QuerySource::Marginal(mu.clone())).unwrap();
    let exact_indep = exact_distinction(&independent, g.as_ref(), mu.as_ref()).unwrap();
    assert_eq!(exact_indep.to_bits(), 0.375f64.to_bits());
    assert!(exact_indep >= 0.25);

    println!(
        "[criterion 4] PASS self-evaluation audit: shared derivation flagged, all 20 trials at \
         dist 0 exactly; independent derivation sees {exact_indep} ({:.2?})",
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: adversarial evaluation strictly dominates static sampling on
// the shortcut instance, and the decisions reflect it.

#[test]
fn acceptance_05_evaluator_ordering() {
    let t0 = Instant::now();
    let mu = biased_cap();
    let g = blank_memorizer();

    let mut pairs = vec![pair(&[0], &[0]); 9];
    pairs.push(pair(&[1], &[1]));
    let e_static: EvaluatorRef = Arc::new(learn_static_evaluator(&pairs).unwrap());
    let seed_pairs = vec![pair(&[0], &[0]), pair(&[1], &[1])];
    let aux = ConstantModel::new(Response(vec![0]));
    let e_adv: EvaluatorRef =
        Arc::new(learn_adversarial_evaluator(&seed_pairs, &aux, &RandomSource::new(5)).unwrap());

    let exact_static = exact_distinction(e_static.as_ref(), g.as_ref(), mu.as_ref()).unwrap();
    let exact_adv = exact_distinction(e_adv.as_ref(), g.as_ref(), mu.as_ref()).unwrap();
    assert!((exact_static - 0.1).abs() < 1e-12);
    assert_eq!(exact_adv.to_bits(), 1f64.to_bits());
    assert!(exact_static < exact_adv);

    let mut ledger = ResourceLedger::default();
    let est_static = mc_distinction(
        e_static.as_ref(),
        g.as_ref(),
        &mu,
        10_000,
        0.01,
        &RandomSource::new(0x51),
        &mut ledger,
    )
    .unwrap();
    let est_adv = mc_distinction(
        e_adv.as_ref(),
        g.as_ref(),
        &mu,
        10_000,
        0.01,
        &RandomSource::new(0x52),
        &mut ledger,
    )
    .unwrap();
    assert!((est_static.dist_hat - exact_static).abs() <= est_static.radius);
    assert!((est_adv.dist_hat - exact_adv).abs() <= est_adv.radius);
    assert!(est_static.dist_hat < est_adv.dist_hat);
    assert_eq!(decide_distinguish(&est_static, 0.5), Decision::CannotDistinguish);
    assert_eq!(decide_distinguish(&est_adv, 0.5), Decision::Distinguishes);

    println!(
        "[criterion 5] PASS evaluator ordering: static sees {:.4} (exact {exact_static:.4}), \
         adversarial sees {:.4} (exact {exact_adv}), decisions split at eps 0.5 ({:.2?})",
        est_static.dist_hat,
        est_adv.dist_hat,
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: the single-query advantage behaves like the non-adaptive
// special case it is.

#[test]
fn acceptance_06_pseudorandom_advantage_special_case() {
    let t0 = Instant::now();

    // Against the uniform distribution every distinguisher is powerless.
    let uniform = FiniteDistribution::uniform(6).unwrap();
    let mut rng = RandomSource::new(0x6A).child("class", 0).rng();
    let mut members = Vec::new();
    for i in 0..10 {
        let accepts: Vec<bool> = (0..6).map(|_| rng.gen_bool(0.5)).collect();
        let flipped: Vec<bool> = accepts.iter().map(|b| !b).collect();
        members.push(Distinguisher { name: format!("rand-{i}"), accepts });
        members.push(Distinguisher { name: format!("rand-{i}-flip"), accepts: flipped });
    }
    let class = DistinguisherClass { members };
    let (adv_uniform, _) = pseudorandom_advantage(&uniform, &class).unwrap();
    assert_eq!(adv_uniform.to_bits(), 0f64.to_bits());

    // A point mass on one of two outcomes is caught with advantage exactly
    // one half by the singleton indicators and by nothing else.
    let point = FiniteDistribution::new(vec![1.0, 0.0]).unwrap();
    let subsets = DistinguisherClass {
        members: vec![
            Distinguisher { name: "none".into(), accepts: vec![false, false] },
            Distinguisher { name: "first".into(), accepts: vec![true, false] },
            Distinguisher { name: "second".into(), accepts: vec![false, true] },
            Distinguisher { name: "all".into(), accepts: vec![true, true] },
        ],
    };
    let (adv_point, winner) = pseudorandom_advantage(&point, &subsets).unwrap();
    assert_eq!(adv_point.to_bits(), 0.5f64.to_bits());
    assert!(winner.name == "first" || winner.name == "second");

    // Relabeling the outcome space moves nothing.
    let k = 8usize;
    let mut rng2 = RandomSource::new(0x6B).child("relabel", 0).rng();
    let raw: Vec<f64> = (0..k).map(|_| rng2.gen_range(1..=16) as f64).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let base = FiniteDistribution::new(probs.clone()).unwrap();
    let base_members: Vec<Vec<bool>> =
        (0..12).map(|_| (0..k).map(|_| rng2.gen_bool(0.5)).collect()).collect();
    let base_class = DistinguisherClass {
        members: base_members
            .iter()
            .enumerate()
            .map(|(i, accepts)| Distinguisher { name: format!("m{i}"), accepts: accepts.clone() })
            .collect(),
    };
    let (adv_base, _) = pseudorandom_advantage(&base, &base_class).unwrap();
    let mut indices: Vec<usize> = (0..k).collect();
    for _ in 0..100 {
        indices.shuffle(&mut rng2);
        let mut probs_p = vec![0.0; k];
        for (i, &target) in indices.iter().enumerate() {
            probs_p[target] = probs[i];
        }
        let relabeled = FiniteDistribution::new(probs_p).unwrap();
        let class_p = DistinguisherClass {
            members: base_members
                .iter()
                .enumerate()
                .map(|(mi, accepts)| {
                    let mut moved = vec![false; k];
                    for (i, &target) in indices.iter().enumerate() {
                        moved[target] = accepts[i];
                    }
                    Distinguisher { name: format!("m{mi}"), accepts: moved }
                })
                .collect(),
        };
        let (adv_p, _) = pseudorandom_advantage(&relabeled, &class_p).unwrap();
        assert!(
            (adv_p - adv_base).abs() <= 1e-12,
            "relabeling moved the advantage: {adv_p} vs {adv_base}"
        );
    }

    println!(
        "[criterion 6] PASS non-adaptive special case: uniform advantage 0, point mass caught \
         at exactly 0.5, 100 relabelings invariant ({:.2?})",
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: a model served over the wire is indistinguishable from the
// same model in process, bit for bit.

#[test]
fn acceptance_07_transport_transparency() {
    let t0 = Instant::now();
    let suite = shipped_suite();
    let mut checked = 0usize;
    for (ci, mu) in suite.iter().enumerate() {
        let train = RandomSource::new(0x7E57).child("cap", ci as u64);
        let eval_samples = draw(mu.as_ref(), 12, &train.child("eval", 0));
        let evaluator = learn_static_evaluator(&eval_samples).unwrap();
        let model_samples = draw(mu.as_ref(), 12, &train.child("model", 0));
        let default = Response(mu.codec().response.zero_value());
        let models: Vec<Arc<dyn Model>> = vec![
            Arc::new(learn_memorizer(&model_samples, default)),
            capability_as_blackbox(mu.clone()),
        ];
        for (mi, g) in models.into_iter().enumerate() {
            let run_seed = 0x7000 + ci as u64 * 16 + mi as u64;
            let mut ledger_local = ResourceLedger::default();
            let local = mc_distinction(
                &evaluator,
                g.as_ref(),
                mu,
                24,
                0.05,
                &RandomSource::new(run_seed),
                &mut ledger_local,
            )
            .unwrap();

            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let addr = listener.local_addr().unwrap();
            let codec = mu.codec();
            let served = g.clone();
            std::thread::spawn(move || {
                let _ = serve_on_listener(served.as_ref(), codec, listener, run_seed, None);
            });
            let remote = connect_model(addr.to_string(), Duration::from_secs(10), mu.codec());
            let mut ledger_remote = ResourceLedger::default();
            let over_wire = mc_distinction(
                &evaluator,
                &remote,
                mu,
                24,
                0.05,
                &RandomSource::new(run_seed),
                &mut ledger_remote,
            )
            .unwrap();
            assert_eq!(
                local, over_wire,
                "estimates diverge over the wire for {} model {mi}",
                mu.name()
            );
            checked += 1;
        }
    }
    println!(
        "[criterion 7] PASS transport transparency: {checked} capability/model pairs \
         bit-identical local vs served ({:.2?})",
        t0.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: every CLI command replays byte-for-byte from its seed.

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pseudint-acc-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|entry| {
            let entry = entry.unwrap();
            (entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).unwrap())
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn acceptance_08_cli_replays_byte_identically() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_pseudint");
    let configs = configs_dir();

    for (cmd, file) in
        [("distinguish", "distinguish.json"), ("pseudoint", "pseudoint.json"), ("sweep", "sweep.json")]
    {
        let mut outputs = Vec::new();
        for round in 0..2 {
            let out = fresh_dir(&format!("{cmd}-{round}"));
            let result = Command::new(bin)
                .args([
                    cmd,
                    "--config",
                    configs.join(file).to_str().unwrap(),
                    "--out-dir",
                    out.to_str().unwrap(),
                ])
                .output()
                .unwrap();
            assert!(
                result.status.code().is_some(),
                "{cmd} was killed by a signal: {result:?}"
            );
            outputs.push((result.stdout.clone(), dir_contents(&out)));
            let _ = std::fs::remove_dir_all(&out);
        }
        assert_eq!(outputs[0].0, outputs[1].0, "{cmd} stdout differs between replays");
        assert_eq!(outputs[0].1, outputs[1].1, "{cmd} report files differ between replays");
        assert!(!outputs[0].1.is_empty(), "{cmd} wrote no report files");
    }

    // zoo-list is static output; it must not drift between invocations.
    let zoo_a = Command::new(bin).arg("zoo-list").output().unwrap();
    let zoo_b = Command::new(bin).arg("zoo-list").output().unwrap();
    assert!(zoo_a.status.success());
    assert_eq!(zoo_a.stdout, zoo_b.stdout);

    // serve-model on stdio: the same seed and the same query script must
    // produce the same transcript.
    let serve_cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(configs.join("serve_model.json")).unwrap())
            .unwrap();
    let mut stdio_cfg = serve_cfg;
    stdio_cfg["addr"] = serde_json::Value::String("stdio".into());
    let cfg_path = std::env::temp_dir()
        .join(format!("pseudint-acc-serve-{}.json", std::process::id()));
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&stdio_cfg).unwrap()).unwrap();
    let script = concat!(
        "{\"kind\":\"hello\",\"protocol_version\":1,\"codec\":\"tokens/symbol\"}\n",
        "{\"kind\":\"query\",\"id\":1,\"x\":\"AAE=\"}\n",
        "{\"kind\":\"query\",\"id\":2,\"x\":\"AQA=\"}\n",
        "{\"kind\":\"bye\"}\n",
    );
    let mut transcripts = Vec::new();
    for _ in 0..2 {
        let mut child = Command::new(bin)
            .args(["serve-model", "--config", cfg_path.to_str().unwrap()])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        child.stdin.as_mut().unwrap().write_all(script.as_bytes()).unwrap();
        drop(child.stdin.take());
        let mut lines = Vec::new();
        let reader = BufReader::new(child.stdout.take().unwrap());
        for line in reader.lines() {
            lines.push(line.unwrap());
        }
        assert!(child.wait().unwrap().success());
        assert!(!lines.is_empty(), "server produced no transcript");
        transcripts.push(lines);
    }
    assert_eq!(transcripts[0], transcripts[1], "serve-model transcripts differ");
    let _ = std::fs::remove_file(&cfg_path);

    println!(
        "[criterion 8] PASS replay determinism: distinguish, pseudoint, sweep, zoo-list, and \
         serve-model all byte-identical across reruns ({:.2?})",
        t0.elapsed()
    );
}
