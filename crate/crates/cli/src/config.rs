//! Versioned JSON config schemas and the builders that turn them into live
//! capabilities and learners.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pseudint::capabilities::{
    load_suite, CapabilitySpec, ConstantLearner, ExactCopyLearner, KGramLearner,
    MemorizerLearner, ParityLearner,
};
use pseudint::learners::{EvaluatorLearner, ModelLearner};
use pseudint::zoo::{
    AdversarialEvaluatorLearner, FixedVerdictEvaluatorLearner, ModelBasedEvaluatorLearner,
    RepeatedEvaluatorLearner, SelfEvaluatorLearner, SharedDerivationSelfEvaluatorLearner,
    StaticEvaluatorLearner,
};
use pseudint::{CapabilityRef, Response, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!("unsupported schema_version {version}; this build understands {SCHEMA_VERSION}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Learner specs

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelLearnerSpec {
    /// Memorize training pairs; `default` (bytes) answers unseen queries,
    /// falling back to the capability's response-codec zero.
    Memorizer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<Vec<u8>>,
    },
    /// Solve for a parity rule over d-bit queries.
    Parity { d: u32 },
    /// Majority response over the training set.
    Constant,
    /// Add-one-smoothed k-gram sampler.
    Kgram { k: usize, alphabet: Vec<u8> },
    /// The capability's own conditional sampler; ignores training data.
    ExactCopy,
}

impl ModelLearnerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelLearnerSpec::Memorizer { .. } => "memorizer",
            ModelLearnerSpec::Parity { .. } => "parity",
            ModelLearnerSpec::Constant => "constant",
            ModelLearnerSpec::Kgram { .. } => "kgram",
            ModelLearnerSpec::ExactCopy => "exact_copy",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvaluatorLearnerSpec {
    /// Memorize the evaluator-side samples; one uniform round.
    Static,
    /// Static storage queried over a fixed number of rounds.
    Repeated { rounds: u32 },
    /// Train an auxiliary model and keep only the samples it errs on.
    Adversarial { aux: ModelLearnerSpec },
    /// Train a fresh model and accept agreement with it.
    SelfEval { model: ModelLearnerSpec },
    /// Reuse the trained model artifact itself; flagged outside-framework.
    SharedSelf,
    /// Pool generator over the samples with a memorizer reference.
    ModelBased { budget: u32 },
    /// Ignore the box entirely.
    Fixed { accept: bool },
}

impl EvaluatorLearnerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            EvaluatorLearnerSpec::Static => "static",
            EvaluatorLearnerSpec::Repeated { .. } => "repeated",
            EvaluatorLearnerSpec::Adversarial { .. } => "adversarial",
            EvaluatorLearnerSpec::SelfEval { .. } => "self_eval",
            EvaluatorLearnerSpec::SharedSelf => "shared_self",
            EvaluatorLearnerSpec::ModelBased { .. } => "model_based",
            EvaluatorLearnerSpec::Fixed { .. } => "fixed",
        }
    }

    /// Whether an `r` sweep can rebuild this evaluator with another round
    /// count.
    pub fn supports_rounds(&self) -> bool {
        matches!(self, EvaluatorLearnerSpec::Static | EvaluatorLearnerSpec::Repeated { .. })
    }
}

/// The codec defaults (memorizer fallback, constant/majority codec) come
/// from the capability the learner will face; heterogeneous suites use the
/// first member's codec.
pub fn build_model_learner(
    spec: &ModelLearnerSpec,
    capability: &CapabilityRef,
) -> Result<Arc<dyn ModelLearner>> {
    Ok(match spec {
        ModelLearnerSpec::Memorizer { default } => {
            let default = default
                .clone()
                .unwrap_or_else(|| capability.codec().response.zero_value());
            Arc::new(MemorizerLearner { default: Response(default) })
        }
        ModelLearnerSpec::Parity { d } => {
            if *d == 0 || *d > 16 {
                bail!("parity learner dimension {d} outside 1..=16");
            }
            Arc::new(ParityLearner { d: *d })
        }
        ModelLearnerSpec::Constant => {
            Arc::new(ConstantLearner { response_codec: capability.codec().response })
        }
        ModelLearnerSpec::Kgram { k, alphabet } => {
            if *k == 0 || alphabet.is_empty() {
                bail!("kgram learner needs k >= 1 and a non-empty alphabet");
            }
            Arc::new(KGramLearner { k: *k, alphabet: alphabet.clone() })
        }
        ModelLearnerSpec::ExactCopy => {
            Arc::new(ExactCopyLearner { capability: capability.clone() })
        }
    })
}

pub fn build_evaluator_learner(
    spec: &EvaluatorLearnerSpec,
    capability: &CapabilityRef,
) -> Result<Arc<dyn EvaluatorLearner>> {
    Ok(match spec {
        EvaluatorLearnerSpec::Static => Arc::new(StaticEvaluatorLearner),
        EvaluatorLearnerSpec::Repeated { rounds } => {
            if *rounds == 0 {
                bail!("repeated evaluator needs rounds >= 1");
            }
            Arc::new(RepeatedEvaluatorLearner { rounds: *rounds })
        }
        EvaluatorLearnerSpec::Adversarial { aux } => Arc::new(AdversarialEvaluatorLearner {
            aux_learner: build_model_learner(aux, capability)?,
        }),
        EvaluatorLearnerSpec::SelfEval { model } => Arc::new(SelfEvaluatorLearner {
            model_learner: build_model_learner(model, capability)?,
        }),
        EvaluatorLearnerSpec::SharedSelf => Arc::new(SharedDerivationSelfEvaluatorLearner),
        EvaluatorLearnerSpec::ModelBased { budget } => {
            if *budget == 0 {
                bail!("model-based evaluator needs budget >= 1");
            }
            Arc::new(ModelBasedEvaluatorLearner { budget: *budget })
        }
        EvaluatorLearnerSpec::Fixed { accept } => Arc::new(FixedVerdictEvaluatorLearner {
            verdict: if *accept { Verdict::Accept } else { Verdict::Reject },
        }),
    })
}

// ---------------------------------------------------------------------------
// Command configs

fn default_timeout_ms() -> u64 {
    5000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSourceSpec {
    /// Train from m capability samples.
    Learner { learner: ModelLearnerSpec, m: u64 },
    /// A model served elsewhere; see the wire-protocol document.
    Remote {
        addr: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatorSideSpec {
    pub learner: EvaluatorLearnerSpec,
    pub n: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModelSpec {
    pub learner: ModelLearnerSpec,
    pub m: u64,
}

/// Either an inline capability list or a pointer to a suite file (resolved
/// relative to the config file).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteSource {
    Inline(Vec<CapabilitySpec>),
    File { suite_file: PathBuf },
}

impl SuiteSource {
    pub fn build(&self, config_dir: &Path) -> Result<Vec<CapabilityRef>> {
        match self {
            SuiteSource::Inline(specs) => {
                if specs.is_empty() {
                    bail!("capability suite is empty");
                }
                specs
                    .iter()
                    .map(|s| s.build().with_context(|| format!("capability {}", s.name())))
                    .collect()
            }
            SuiteSource::File { suite_file } => {
                let path = if suite_file.is_absolute() {
                    suite_file.clone()
                } else {
                    config_dir.join(suite_file)
                };
                Ok(load_suite(&path)?)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistinguishConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub capability: CapabilitySpec,
    pub model: ModelSourceSpec,
    pub evaluator: EvaluatorSideSpec,
    pub epsilon: f64,
    pub trials_per_arm: u64,
    pub alpha: f64,
}

impl DistinguishConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: DistinguishConfig =
            serde_json::from_str(text).context("distinguish config does not match the schema")?;
        check_schema(cfg.schema_version)?;
        if !(cfg.epsilon > 0.0 && cfg.epsilon < 1.0) {
            bail!("epsilon {} outside (0, 1)", cfg.epsilon);
        }
        if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
            bail!("alpha {} outside (0, 1)", cfg.alpha);
        }
        if cfg.trials_per_arm == 0 {
            bail!("trials_per_arm must be at least 1");
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudointConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub suite: SuiteSource,
    pub model: TrainedModelSpec,
    pub evaluator: EvaluatorSideSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u64,
    pub trials_per_arm: u64,
    pub alpha: f64,
}

impl PseudointConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PseudointConfig =
            serde_json::from_str(text).context("pseudoint config does not match the schema")?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }
}

/// Grid axes; absent axes stay at the base value. Points are enumerated in
/// nesting order m, n, r, trials_per_arm, epsilon.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials_per_arm: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub base: SweepBase,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepBase {
    pub suite: SuiteSource,
    pub model: TrainedModelSpec,
    pub evaluator: EvaluatorSideSpec,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u64,
    pub trials_per_arm: u64,
    pub alpha: f64,
}

/// One resolved grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub m: u64,
    pub n: u64,
    pub r: u32,
    pub trials_per_arm: u64,
    pub epsilon: f64,
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            serde_json::from_str(text).context("sweep config does not match the schema")?;
        check_schema(cfg.schema_version)?;
        for (axis, empty) in [
            ("m", cfg.grid.m.as_ref().is_some_and(|v| v.is_empty())),
            ("n", cfg.grid.n.as_ref().is_some_and(|v| v.is_empty())),
            ("r", cfg.grid.r.as_ref().is_some_and(|v| v.is_empty())),
            ("trials_per_arm", cfg.grid.trials_per_arm.as_ref().is_some_and(|v| v.is_empty())),
            ("epsilon", cfg.grid.epsilon.as_ref().is_some_and(|v| v.is_empty())),
        ] {
            if empty {
                bail!("grid axis {axis} is present but empty");
            }
        }
        if cfg.grid.r.is_some() && !cfg.base.evaluator.learner.supports_rounds() {
            bail!(
                "an r grid needs a static or repeated base evaluator, not {}",
                cfg.base.evaluator.learner.label()
            );
        }
        Ok(cfg)
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let base_r = match self.base.evaluator.learner {
            EvaluatorLearnerSpec::Repeated { rounds } => rounds,
            _ => 1,
        };
        let ms = self.grid.m.clone().unwrap_or_else(|| vec![self.base.model.m]);
        let ns = self.grid.n.clone().unwrap_or_else(|| vec![self.base.evaluator.n]);
        let rs = self.grid.r.clone().unwrap_or_else(|| vec![base_r]);
        let mcs = self
            .grid
            .trials_per_arm
            .clone()
            .unwrap_or_else(|| vec![self.base.trials_per_arm]);
        let eps = self.grid.epsilon.clone().unwrap_or_else(|| vec![self.base.epsilon]);
        let mut points = Vec::new();
        for &m in &ms {
            for &n in &ns {
                for &r in &rs {
                    for &trials_per_arm in &mcs {
                        for &epsilon in &eps {
                            points.push(GridPoint { m, n, r, trials_per_arm, epsilon });
                        }
                    }
                }
            }
        }
        points
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServeConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub capability: CapabilitySpec,
    pub model: TrainedModelSpec,
    /// "stdio" or a TCP bind address like "127.0.0.1:4141".
    pub addr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sessions: Option<u64>,
}

impl ServeConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ServeConfig =
            serde_json::from_str(text).context("serve config does not match the schema")?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }
}
