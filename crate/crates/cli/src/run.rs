//! Command implementations. Each returns the files it read and wrote, the
//! effective configuration and a summary for the manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use geohmm::estimation::{LearnConfig, LearnReport};
use geohmm::evalkl::{kl_sampled, KlEstimate};
use geohmm::experiment::{
    best_run, learn_restarts, learn_restarts_from, prefix_sweep, rng_for, run_comparison, ExperimentConfig,
    RestartPlan, RunResult,
};
use geohmm::init::{init_model, BucketConfig};
use geohmm::io::{read_experience, read_model, write_atomic, write_experience, write_model};
use geohmm::render::render_svg;
use geohmm::simgen::{make_loop_model, sample_sequence, LoopSpec};
use geohmm::{check_consistency, ConsistencyReport, CoordinateMode, GeoHmm};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;

/// Simulation draws use their own stream of the seed.
const STREAM_SIMULATE: u64 = 7 << 32;
const STREAM_KL: u64 = 8 << 32;

pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: Value,
    pub seed: Option<u64>,
    pub summary: Value,
    /// Human-readable report for `--format text`.
    pub text: String,
    /// Set by `check` when the model violates its constraints.
    pub inconsistent: bool,
}

impl Outcome {
    fn new(summary: Value, text: String) -> Self {
        Self {
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: Value::Null,
            seed: None,
            summary,
            text,
            inconsistent: false,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> Result<GeoHmm> {
    read_model(path).with_context(|| format!("reading model {}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(geohmm::GeoError::from)
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn loop_model(a: &LoopModelArgs) -> Result<Outcome> {
    let mut spec: LoopSpec = match &a.spec {
        Some(p) => load_json(p)?,
        None => LoopSpec::default(),
    };
    if let Some(m) = a.mode {
        spec.mode = m.into();
    }
    let model = make_loop_model(&spec)?;
    write_model(&a.out, &model)?;
    let mut o = Outcome::new(
        json!({ "states": model.n_states(), "obs_dims": model.obs_dims }),
        format!("wrote {}-state loop model to {}\n", model.n_states(), a.out.display()),
    );
    o.inputs.extend(a.spec.clone());
    o.outputs.push(a.out.clone());
    o.config = to_value(&spec);
    Ok(o)
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    ensure!(a.length >= 1, geohmm::GeoError::Input("length must be at least 1".into()));
    let model = load_model(&a.model)?;
    let e = sample_sequence(&model, a.length, &mut rng_for(a.seed, STREAM_SIMULATE))?;
    write_experience(&a.out, &e, Some(&model.obs_dims))?;
    let mut o = Outcome::new(
        json!({ "steps": e.len(), "readings": e.len() - 1 }),
        format!("wrote {} steps to {}\n", e.len(), a.out.display()),
    );
    o.inputs.push(a.model.clone());
    o.outputs.push(a.out.clone());
    o.seed = Some(a.seed);
    Ok(o)
}

fn bucket_config(b: &BucketArgs) -> Result<BucketConfig> {
    let cfg = BucketConfig::new(b.sigma_x, b.sigma_y, b.sigma_theta);
    cfg.validate()?;
    Ok(cfg)
}

pub fn init(a: &InitArgs) -> Result<Outcome> {
    let file = read_experience(&a.experience).with_context(|| format!("reading {}", a.experience.display()))?;
    let cfg = bucket_config(&a.bucket)?;
    let dims = file.alphabet_or_inferred();
    let model = init_model(&file.sequence, a.states, &dims, a.mode.into(), &cfg)?;
    write_model(&a.out, &model)?;
    let mut o = Outcome::new(
        json!({ "states": a.states }),
        format!("wrote initial {}-state model to {}\n", a.states, a.out.display()),
    );
    o.inputs.push(a.experience.clone());
    o.outputs.push(a.out.clone());
    o.config = to_value(&cfg);
    Ok(o)
}

/// `dir/name.ext` becomes `dir/name.<tag>.ext`.
fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

#[derive(Serialize)]
struct RunEntry<'a> {
    restart: usize,
    report: &'a LearnReport,
}

#[derive(Serialize)]
struct PrefixEntry<'a> {
    prefix: usize,
    model: String,
    best_restart: usize,
    runs: Vec<RunEntry<'a>>,
}

#[derive(Serialize)]
struct LearnFile<'a> {
    config: &'a LearnConfig,
    results: Vec<PrefixEntry<'a>>,
}

pub fn learn(a: &LearnArgs) -> Result<Outcome> {
    ensure!(a.restarts >= 1, geohmm::GeoError::Input("at least one restart is required".into()));
    let file = read_experience(&a.experience).with_context(|| format!("reading {}", a.experience.display()))?;
    let initial = a.initial.as_deref().map(load_model).transpose()?;
    let mode: CoordinateMode = match (&initial, a.mode) {
        (Some(m), Some(flag)) if m.mode != CoordinateMode::from(flag) => {
            bail!(geohmm::GeoError::Input("--mode differs from the initial model's mode".into()))
        }
        (Some(m), _) => m.mode,
        (None, flag) => flag.map(Into::into).unwrap_or(CoordinateMode::Relative),
    };
    let n_states = match (&initial, a.states) {
        (Some(m), Some(n)) if m.n_states() != n => {
            bail!(geohmm::GeoError::Input("--states differs from the initial model".into()))
        }
        (Some(m), _) => m.n_states(),
        (None, Some(n)) => n,
        (None, None) => bail!(geohmm::GeoError::Input("--states is required without --initial".into())),
    };
    let cfg = LearnConfig {
        constraint_level: a.constraints.into(),
        mode,
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        prob_floor: a.prob_floor,
        use_odometry: !a.no_odometry,
        rng_seed: a.seed,
        ..LearnConfig::default()
    };
    cfg.validate()?;
    let plan = RestartPlan { n_states, bucket: bucket_config(&a.bucket)?, jitter: a.jitter };
    let dims = match &initial {
        Some(m) => m.obs_dims.clone(),
        None => file.alphabet_or_inferred(),
    };
    let full = file.sequence.len();
    let prefixes: Vec<usize> = if a.prefix_lengths.is_empty() { vec![full] } else { a.prefix_lengths.clone() };
    for &p in &prefixes {
        ensure!(
            (1..=full).contains(&p),
            geohmm::GeoError::Input(format!("prefix {p} is outside 1..={full}"))
        );
    }

    let mut all: Vec<(usize, PathBuf, Vec<RunResult>, usize)> = Vec::new();
    for &p in &prefixes {
        let e = file.sequence.prefix(p);
        let runs = match &initial {
            Some(m) => learn_restarts_from(&e, m, &cfg, a.jitter, a.restarts, a.seed)?,
            None => learn_restarts(&e, &dims, &cfg, &plan, a.restarts, a.seed)?,
        };
        let best = best_run(&runs).expect("at least one restart");
        let path = if a.prefix_lengths.is_empty() { a.out.clone() } else { tagged_path(&a.out, &format!("prefix{p}")) };
        write_model(&path, &runs[best].model)?;
        all.push((p, path, runs, best));
    }

    let report_path = a.report.clone().unwrap_or_else(|| a.out.with_extension("report.json"));
    let results: Vec<PrefixEntry> = all
        .iter()
        .map(|(p, path, runs, best)| PrefixEntry {
            prefix: *p,
            model: path.display().to_string(),
            best_restart: *best,
            runs: runs.iter().map(|r| RunEntry { restart: r.restart, report: &r.report }).collect(),
        })
        .collect();
    write_json(&report_path, &LearnFile { config: &cfg, results })?;

    let mut text = format!("{:>7} {:>8} {:>16} {:>10} {:>10}\n", "prefix", "restart", "loglik", "iters", "converged");
    let mut summary = Vec::new();
    for (p, _, runs, best) in &all {
        let r = &runs[*best];
        text.push_str(&format!(
            "{:>7} {:>8} {:>16.6} {:>10} {:>10}\n",
            p,
            r.restart,
            r.report.final_loglik(),
            r.report.iterations_run,
            r.report.converged
        ));
        summary.push(json!({
            "prefix": p,
            "best_restart": r.restart,
            "final_loglik": r.report.final_loglik(),
            "iterations": r.report.iterations_run,
            "converged": r.report.converged,
            "monotone": r.report.is_monotone(),
        }));
    }
    let mut o = Outcome::new(Value::Array(summary), text);
    o.inputs.push(a.experience.clone());
    o.inputs.extend(a.initial.clone());
    o.outputs.extend(all.iter().map(|(_, p, _, _)| p.clone()));
    o.outputs.push(report_path);
    o.config = json!({ "learn": cfg, "restart_plan": plan });
    o.seed = Some(a.seed);
    Ok(o)
}

pub fn eval_kl(a: &EvalKlArgs) -> Result<Outcome> {
    let truth = load_model(&a.truth)?;
    let learned = load_model(&a.learned)?;
    let est: KlEstimate = kl_sampled(&truth, &learned, a.length, a.sequences, &mut rng_for(a.seed, STREAM_KL))?;
    if let Some(out) = &a.out {
        write_json(out, &est)?;
    }
    let text = if est.infinite {
        "KL = inf (the learned model rules out a sampled sequence)\n".to_string()
    } else {
        format!(
            "KL = {:.6} ± {:.6} nats/symbol ({} sequences of length {})\n",
            est.value, est.std_error, est.n_sequences, est.seq_length
        )
    };
    // JSON cannot carry an infinite number
    let summary = if est.infinite { json!({ "infinite": true }) } else { to_value(&est) };
    let mut o = Outcome::new(summary, text);
    o.inputs.extend([a.truth.clone(), a.learned.clone()]);
    o.outputs.extend(a.out.clone());
    o.seed = Some(a.seed);
    Ok(o)
}

pub fn check(a: &CheckArgs) -> Result<Outcome> {
    let model = load_model(&a.model)?;
    let report: ConsistencyReport = check_consistency(&model, a.level.into(), a.tol);
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    let mut o = Outcome::new(
        json!({ "consistent": report.is_consistent(), "violations": report.violations.len(), "max_magnitude": report.max_magnitude() }),
        report.to_string(),
    );
    o.inconsistent = !report.is_consistent();
    o.inputs.push(a.model.clone());
    o.outputs.extend(a.out.clone());
    o.config = json!({ "level": a.level, "tol": a.tol });
    Ok(o)
}

pub fn render(a: &RenderArgs) -> Result<Outcome> {
    let model = load_model(&a.model)?;
    let svg = render_svg(&model)?;
    write_atomic(&a.out, svg.as_bytes())?;
    let mut o = Outcome::new(json!({ "states": model.n_states() }), format!("wrote {}\n", a.out.display()));
    o.inputs.push(a.model.clone());
    o.outputs.push(a.out.clone());
    Ok(o)
}

pub fn experiment(a: &ExperimentArgs) -> Result<Outcome> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.sequences {
        cfg.n_sequences = n;
    }
    if let Some(r) = a.restarts {
        cfg.restarts = r;
    }
    if let Some(t) = a.length {
        cfg.seq_length = t;
    }
    cfg.learn.mode = cfg.environment.mode;
    let (summary, text) = match a.kind {
        ExperimentKind::Table => {
            let c = run_comparison(&cfg)?;
            write_json(&a.out, &c)?;
            let s = json!({
                "with_odometry": c.with_odometry,
                "without_odometry": c.without_odometry,
                "kl_ratio": c.kl_ratio,
                "p_value": c.test.p_value,
            });
            (s, c.to_string())
        }
        ExperimentKind::Sweep => {
            let s = prefix_sweep(&cfg, &a.prefixes)?;
            write_json(&a.out, &s)?;
            (to_value(&s.rows), s.to_string())
        }
    };
    let mut o = Outcome::new(summary, text);
    o.inputs.extend(a.config.clone());
    o.outputs.push(a.out.clone());
    o.config = to_value(&cfg);
    o.seed = Some(a.seed);
    Ok(o)
}
