//! Deterministic report writers. JSON is pretty-printed with a trailing
//! newline; CSV floats are fixed to six decimals so replays diff clean.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use pseudint::learners::{CapabilityReport, TrialRecord};
use pseudint::Decision;

pub fn config_sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn prob(x: f64) -> String {
    format!("{x:.6}")
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut writer = csv::Writer::from_path(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(path)
}

fn decision_cell(decision: Option<Decision>) -> String {
    decision.map(|d| d.as_str().to_string()).unwrap_or_default()
}

pub struct DistinguishRow<'a> {
    pub capability: &'a str,
    pub model: &'a str,
    pub evaluator: &'a str,
    pub epsilon: f64,
    pub alpha: f64,
    pub trials_per_arm: u64,
    pub p_hat_model: f64,
    pub p_hat_capability: f64,
    pub dist_hat: f64,
    pub radius: f64,
    pub decision: Decision,
    pub exact_dist: Option<f64>,
}

pub fn write_distinguish_csv(dir: &Path, row: &DistinguishRow<'_>) -> Result<PathBuf> {
    let header = vec![
        "capability", "model", "evaluator", "epsilon", "alpha", "trials_per_arm",
        "p_hat_model", "p_hat_capability", "dist_hat", "radius", "decision", "exact_dist",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    let data = vec![
        row.capability.to_string(),
        row.model.to_string(),
        row.evaluator.to_string(),
        prob(row.epsilon),
        prob(row.alpha),
        row.trials_per_arm.to_string(),
        prob(row.p_hat_model),
        prob(row.p_hat_capability),
        prob(row.dist_hat),
        prob(row.radius),
        row.decision.as_str().to_string(),
        row.exact_dist.map(prob).unwrap_or_default(),
    ];
    write_csv(dir, "distinguish_report.csv", &[header, data])
}

pub fn write_trials_csv(dir: &Path, name: &str, trials: &[TrialRecord]) -> Result<PathBuf> {
    let mut rows = vec![vec![
        "capability".to_string(),
        "trial".to_string(),
        "p_hat_model".to_string(),
        "p_hat_capability".to_string(),
        "dist_hat".to_string(),
        "radius".to_string(),
        "decision".to_string(),
        "error".to_string(),
    ]];
    for t in trials {
        rows.push(vec![
            t.capability.clone(),
            t.trial.to_string(),
            prob(t.p_hat_model),
            prob(t.p_hat_capability),
            prob(t.dist_hat),
            prob(t.radius),
            decision_cell(t.decision),
            t.error.clone().unwrap_or_default(),
        ]);
    }
    write_csv(dir, name, &rows)
}

pub struct SweepRow<'a> {
    pub point: crate::config::GridPoint,
    pub report: &'a CapabilityReport,
}

pub fn write_sweep_csv(dir: &Path, rows: &[SweepRow<'_>]) -> Result<PathBuf> {
    let mut out = vec![vec![
        "m", "n", "r", "trials_per_arm", "epsilon", "capability",
        "pass_count", "fail_count", "inconclusive_count", "errored_count",
        "pass_rate", "verdict_pass", "mean_dist_hat",
        "samples_model", "samples_evaluator", "interactions", "model_queries",
        "learner_steps_model", "learner_steps_evaluator",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>()];
    for row in rows {
        let r = row.report;
        out.push(vec![
            row.point.m.to_string(),
            row.point.n.to_string(),
            row.point.r.to_string(),
            row.point.trials_per_arm.to_string(),
            prob(row.point.epsilon),
            r.capability.clone(),
            r.pass_count.to_string(),
            r.fail_count.to_string(),
            r.inconclusive_count.to_string(),
            r.errored_count.to_string(),
            prob(r.pass_rate),
            r.verdict_pass.to_string(),
            prob(r.mean_dist_hat),
            r.ledger.samples_model.to_string(),
            r.ledger.samples_evaluator.to_string(),
            r.ledger.interactions.to_string(),
            r.ledger.model_queries.to_string(),
            r.ledger.learner_steps_model.to_string(),
            r.ledger.learner_steps_evaluator.to_string(),
        ]);
    }
    write_csv(dir, "sweep.csv", &out)
}
