//! `pseudint` — harness around the evaluation library: single distinction
//! runs, full experiments over capability suites, parameter sweeps, and a
//! model server speaking the NDJSON wire protocol.

mod config;
mod output;

use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use pseudint::learners::ExperimentSettings;
use pseudint::remote::{connect_model, serve_model, serve_on_listener, Transport};
use pseudint::{
    exact_distinction, mc_distinction, pseudointelligence_experiment, pseudointelligence_trial,
    ComputeMeter, Decision, DistinctionEstimate, ExperimentConfig, PseudointelligenceReport,
    RandomSource, ResourceLedger,
};

use config::{
    build_evaluator_learner, build_model_learner, DistinguishConfig, EvaluatorLearnerSpec,
    GridPoint, ModelSourceSpec, PseudointConfig, ServeConfig, SweepConfig, SCHEMA_VERSION,
};
use output::{
    config_sha256, ensure_out_dir, prob, write_distinguish_csv, write_json, write_sweep_csv,
    write_trials_csv, DistinguishRow, SweepRow,
};

const OUTSIDE_FRAMEWORK_BANNER: &str = "OUTSIDE-FRAMEWORK: the evaluator derivation reads the \
trained model artifact; the independence assumptions behind the verdict do not hold.";

#[derive(Parser)]
#[command(name = "pseudint", version, about = "Adaptive evaluation experiments", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for trial parallelism (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the distinction statistic for one capability and decide.
    Distinguish(RunArgs),
    /// Run the experiment over a capability suite against an (epsilon, delta) contract.
    Pseudoint(RunArgs),
    /// Sweep experiment parameters over a grid into a CSV matrix.
    Sweep(RunArgs),
    /// Train a model and serve it over stdio or TCP.
    ServeModel(RunArgs),
    /// List the built-in capabilities and learners.
    ZooList,
}

/// Die quietly when stdout goes away (`pseudint zoo-list | head`) instead
/// of panicking mid-print.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn main() {
    reset_sigpipe();
    env_logger::init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Distinguish(args) => {
            setup_workers(args.workers)?;
            cmd_distinguish(&args)
        }
        Command::Pseudoint(args) => {
            setup_workers(args.workers)?;
            cmd_pseudoint(&args)
        }
        Command::Sweep(args) => {
            setup_workers(args.workers)?;
            cmd_sweep(&args)
        }
        Command::ServeModel(args) => cmd_serve_model(&args),
        Command::ZooList => cmd_zoo_list(),
    }
}

fn setup_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes.clone())
        .with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok((bytes, text))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

// ---------------------------------------------------------------------------
// distinguish

#[derive(Serialize)]
struct DistinguishReport {
    schema_version: u32,
    config_sha256: String,
    seed: u64,
    capability: String,
    model: String,
    evaluator: String,
    epsilon: f64,
    alpha: f64,
    trials_per_arm: u64,
    outside_framework: bool,
    estimate: DistinctionEstimate,
    decision: Decision,
    /// Exact statistic for the trained pair when every round enumerates.
    exact_dist: Option<f64>,
    ledger: ResourceLedger,
}

fn cmd_distinguish(args: &RunArgs) -> Result<i32> {
    let (bytes, text) = read_config(&args.config)?;
    let cfg = DistinguishConfig::parse(&text)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    ensure_out_dir(&args.out_dir)?;

    let capability = cfg.capability.build()?;
    let l_e = build_evaluator_learner(&cfg.evaluator.learner, &capability)?;
    let evaluator_label = format!("{}[n={}]", cfg.evaluator.learner.label(), cfg.evaluator.n);
    let master = RandomSource::new(seed);

    let (model_label, outside, estimate, decision, exact, ledger) = match &cfg.model {
        ModelSourceSpec::Learner { learner, m } => {
            let l_g = build_model_learner(learner, &capability)?;
            let exp = ExperimentConfig {
                epsilon: cfg.epsilon,
                delta: 0.5,
                m: *m,
                n: cfg.evaluator.n,
                trials: 1,
                mc_trials_per_arm: cfg.trials_per_arm,
                alpha: cfg.alpha,
                suite: vec![capability.clone()],
            };
            let run = pseudointelligence_trial(
                l_g.as_ref(),
                l_e.as_ref(),
                &capability,
                &exp,
                0,
                &master.child("capability", 0),
            )?;
            let exact =
                exact_distinction(run.evaluator.as_ref(), run.model.as_ref(), capability.as_ref())
                    .ok();
            (
                format!("{}[m={}]", learner.label(), m),
                l_e.derives_from_model(),
                run.estimate,
                run.decision,
                exact,
                run.ledger,
            )
        }
        ModelSourceSpec::Remote { addr, timeout_ms } => {
            if l_e.derives_from_model() {
                bail!(
                    "evaluator {} derives from the trained model artifact, which a remote \
                     model does not expose",
                    cfg.evaluator.learner.label()
                );
            }
            let mut ledger = ResourceLedger::new();
            let trial_src = master.child("capability", 0).child("trial", 0);
            let (_, s_e) = pseudint::draw_disjoint_samples(
                capability.as_ref(),
                0,
                cfg.evaluator.n,
                &trial_src,
                &mut ledger,
            );
            let mut meter = ComputeMeter::new();
            let mut rng = trial_src.child("learn-evaluator", 0).rng();
            let evaluator = l_e.train(&s_e, &mut rng, &mut meter)?;
            ledger.learner_steps_evaluator = meter.steps();
            ledger.expressivity_bits_evaluator = l_e.expressivity_bits(&s_e);

            let remote = connect_model(
                addr.clone(),
                Duration::from_millis(*timeout_ms),
                capability.codec(),
            );
            // The Monte Carlo master is the root source so a server started
            // with the same seed replays identical per-session streams.
            let estimate = mc_distinction(
                evaluator.as_ref(),
                &remote,
                &capability,
                cfg.trials_per_arm,
                cfg.alpha,
                &master,
                &mut ledger,
            )?;
            let decision = pseudint::decide_distinguish(&estimate, cfg.epsilon);
            (format!("remote[{addr}]"), false, estimate, decision, None, ledger)
        }
    };

    if outside {
        println!("{OUTSIDE_FRAMEWORK_BANNER}");
    }

    let report = DistinguishReport {
        schema_version: SCHEMA_VERSION,
        config_sha256: config_sha256(&bytes),
        seed,
        capability: cfg.capability.name().to_string(),
        model: model_label.clone(),
        evaluator: evaluator_label.clone(),
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        trials_per_arm: cfg.trials_per_arm,
        outside_framework: outside,
        estimate: estimate.clone(),
        decision,
        exact_dist: exact,
        ledger,
    };
    write_json(&args.out_dir, "distinguish_report.json", &report)?;
    write_distinguish_csv(
        &args.out_dir,
        &DistinguishRow {
            capability: &report.capability,
            model: &model_label,
            evaluator: &evaluator_label,
            epsilon: cfg.epsilon,
            alpha: cfg.alpha,
            trials_per_arm: cfg.trials_per_arm,
            p_hat_model: estimate.p_hat_model,
            p_hat_capability: estimate.p_hat_capability,
            dist_hat: estimate.dist_hat,
            radius: estimate.radius,
            decision,
            exact_dist: exact,
        },
    )?;

    println!(
        "decision: {} (dist_hat={}, radius={}, epsilon={})",
        decision.as_str(),
        prob(estimate.dist_hat),
        prob(estimate.radius),
        prob(cfg.epsilon),
    );
    Ok(match decision {
        Decision::CannotDistinguish => 0,
        Decision::Distinguishes => 2,
        Decision::Inconclusive => 3,
    })
}

// ---------------------------------------------------------------------------
// pseudoint

#[derive(Serialize)]
struct PseudointOutput {
    schema_version: u32,
    config_sha256: String,
    seed: u64,
    outside_framework: bool,
    report: PseudointelligenceReport,
}

fn cmd_pseudoint(args: &RunArgs) -> Result<i32> {
    let (bytes, text) = read_config(&args.config)?;
    let cfg = PseudointConfig::parse(&text)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    ensure_out_dir(&args.out_dir)?;

    let suite = cfg.suite.build(&config_dir(&args.config))?;
    let first = suite[0].clone();
    let l_g = build_model_learner(&cfg.model.learner, &first)?;
    let l_e = build_evaluator_learner(&cfg.evaluator.learner, &first)?;
    let exp = ExperimentConfig {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        m: cfg.model.m,
        n: cfg.evaluator.n,
        trials: cfg.trials,
        mc_trials_per_arm: cfg.trials_per_arm,
        alpha: cfg.alpha,
        suite,
    };
    // Keyed like grid point 0 so a one-point sweep reproduces this command.
    let master = RandomSource::new(seed).child("grid", 0);
    let report = pseudointelligence_experiment(l_g.as_ref(), l_e.as_ref(), &exp, &master)?;

    if report.outside_framework {
        println!("{OUTSIDE_FRAMEWORK_BANNER}");
        log::warn!("outside-framework evaluator derivation: {}", l_e.name());
    }
    for cap in &report.capabilities {
        println!(
            "capability {}: {} (pass_rate={}, mean_dist_hat={})",
            cap.capability,
            if cap.verdict_pass { "pass" } else { "fail" },
            prob(cap.pass_rate),
            prob(cap.mean_dist_hat),
        );
    }
    let passed = report.capabilities.iter().filter(|c| c.verdict_pass).count();
    println!(
        "overall: {} ({passed}/{} capabilities pass{})",
        if report.all_pass { "pass" } else { "fail" },
        report.capabilities.len(),
        if report.partial { "; some trials errored" } else { "" },
    );

    let out = PseudointOutput {
        schema_version: SCHEMA_VERSION,
        config_sha256: config_sha256(&bytes),
        seed,
        outside_framework: report.outside_framework,
        report,
    };
    write_json(&args.out_dir, "pseudoint_report.json", &out)?;
    write_trials_csv(&args.out_dir, "pseudoint_trials.csv", &out.report.trials)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Serialize)]
struct SweepMeta {
    schema_version: u32,
    config_sha256: String,
    seed: u64,
    outside_framework: bool,
    settings: ExperimentSettings,
    points: Vec<GridPoint>,
}

fn cmd_sweep(args: &RunArgs) -> Result<i32> {
    let (bytes, text) = read_config(&args.config)?;
    let cfg = SweepConfig::parse(&text)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    ensure_out_dir(&args.out_dir)?;

    let suite = cfg.base.suite.build(&config_dir(&args.config))?;
    if suite.is_empty() {
        bail!("capability suite is empty");
    }
    let first = suite[0].clone();
    let l_g = build_model_learner(&cfg.base.model.learner, &first)?;
    let points = cfg.points();

    // Every grid point reuses the same master stream (common random
    // numbers): rows differ only through the parameters, never through
    // resampling, and a one-point grid reproduces cmd_pseudoint exactly.
    let master = RandomSource::new(seed).child("grid", 0);
    let runs: Vec<(GridPoint, PseudointelligenceReport)> = points
        .par_iter()
        .map(|pt| -> Result<(GridPoint, PseudointelligenceReport)> {
            let eval_spec = if cfg.grid.r.is_some() {
                EvaluatorLearnerSpec::Repeated { rounds: pt.r }
            } else {
                cfg.base.evaluator.learner.clone()
            };
            let l_e = build_evaluator_learner(&eval_spec, &first)?;
            let exp = ExperimentConfig {
                epsilon: pt.epsilon,
                delta: cfg.base.delta,
                m: pt.m,
                n: pt.n,
                trials: cfg.base.trials,
                mc_trials_per_arm: pt.trials_per_arm,
                alpha: cfg.base.alpha,
                suite: suite.clone(),
            };
            let report =
                pseudointelligence_experiment(l_g.as_ref(), l_e.as_ref(), &exp, &master)?;
            Ok((*pt, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let outside = runs.iter().any(|(_, r)| r.outside_framework);
    if outside {
        println!("{OUTSIDE_FRAMEWORK_BANNER}");
    }

    let mut rows = Vec::new();
    for (pt, report) in &runs {
        for cap in &report.capabilities {
            rows.push(SweepRow { point: *pt, report: cap });
        }
    }
    write_sweep_csv(&args.out_dir, &rows)?;

    let settings = runs
        .first()
        .map(|(_, r)| r.settings.clone())
        .expect("a sweep grid always has at least one point");
    let meta = SweepMeta {
        schema_version: SCHEMA_VERSION,
        config_sha256: config_sha256(&bytes),
        seed,
        outside_framework: outside,
        settings,
        points,
    };
    write_json(&args.out_dir, "sweep_meta.json", &meta)?;

    println!("sweep: {} points x {} capabilities", runs.len(), suite.len());
    Ok(0)
}

// ---------------------------------------------------------------------------
// serve-model

fn cmd_serve_model(args: &RunArgs) -> Result<i32> {
    let (_, text) = read_config(&args.config)?;
    let cfg = ServeConfig::parse(&text)?;
    let seed = args.seed.unwrap_or(cfg.seed);

    let capability = cfg.capability.build()?;
    let l_g = build_model_learner(&cfg.model.learner, &capability)?;
    let train_src = RandomSource::new(seed).child("serve-train", 0);
    let mut ledger = ResourceLedger::new();
    let (s_g, _) = pseudint::draw_disjoint_samples(
        capability.as_ref(),
        cfg.model.m,
        0,
        &train_src,
        &mut ledger,
    );
    let mut meter = ComputeMeter::new();
    let mut rng = train_src.child("learn-model", 0).rng();
    let g = l_g.train(&s_g, &mut rng, &mut meter)?;
    let codec = capability.codec();

    if cfg.addr == "stdio" {
        // The protocol owns stdout; diagnostics go to stderr.
        eprintln!("serving {} on stdio", l_g.name());
        serve_model(g.as_ref(), codec, Transport::Stdio, seed, cfg.max_sessions)?;
    } else {
        let listener = TcpListener::bind(&cfg.addr)
            .with_context(|| format!("binding {}", cfg.addr))?;
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush().ok();
        serve_on_listener(g.as_ref(), codec, listener, seed, cfg.max_sessions)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// zoo-list

fn cmd_zoo_list() -> Result<i32> {
    println!("capabilities (suite/config \"kind\"):");
    println!("  tabular     finite query table with explicit response probabilities");
    println!("  parity      subset-parity labels over d-bit queries");
    println!("  kgram       k-gram sampler over a byte alphabet");
    println!("model learners:");
    println!("  memorizer   recall training pairs, fixed default elsewhere");
    println!("  parity      solve for a consistent parity rule");
    println!("  constant    majority response over the training set");
    println!("  kgram       add-one-smoothed k-gram estimates");
    println!("  exact_copy  the capability's own conditional sampler");
    println!("evaluator learners:");
    println!("  static      one uniform round over stored samples");
    println!("  repeated    fixed number of stored-sample rounds");
    println!("  adversarial keep only samples an auxiliary model gets wrong");
    println!("  self_eval   accept agreement with an independently trained model");
    println!("  shared_self reuse the trained model artifact (outside-framework)");
    println!("  model_based draw queries from a generator pool with a reference model");
    println!("  fixed       constant verdict, zero rounds");
    Ok(0)
}
