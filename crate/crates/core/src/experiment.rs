//! Restarted learning runs and the with/without-odometry comparisons.
//!
//! Every job derives its random stream from the experiment seed and its own
//! coordinates, so results do not depend on scheduling and jobs run in
//! parallel.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{GeoError, Result};
use crate::estimation::{em_learn, LearnConfig, LearnReport};
use crate::evalkl::{kl_sampled, KlEstimate, DEFAULT_KL_LENGTH, DEFAULT_KL_SEQUENCES};
use crate::init::{init_model, BucketConfig};
use crate::model::{CoordinateMode, ExperienceSequence, GeoHmm};
use crate::simgen::{make_loop_model, sample_sequence, LoopSpec};

/// Stream ids keep the purposes of random draws apart.
const STREAM_DATA: u64 = 1 << 32;
const STREAM_EVAL: u64 = 2 << 32;
const STREAM_INIT: u64 = 3 << 32;

/// A ChaCha stream for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = draws.iter().sum();
    draws.into_iter().map(|v| v / s).collect()
}

/// Random transitions and emissions (flat Dirichlet rows), zero-mean
/// relations with variance `var`.
pub fn random_model<R: Rng + ?Sized>(n: usize, obs_dims: &[usize], mode: CoordinateMode, var: f64, rng: &mut R) -> GeoHmm {
    let mut m = GeoHmm::uniform(n, obs_dims, mode, var);
    m.transitions = (0..n).map(|_| random_simplex(n, rng)).collect();
    m.emissions = obs_dims.iter().map(|&k| (0..n).map(|_| random_simplex(k, rng)).collect()).collect();
    m
}

/// Mixes every transition and emission row with a random one.
pub fn jitter_model<R: Rng + ?Sized>(model: &GeoHmm, amount: f64, rng: &mut R) -> GeoHmm {
    let mut m = model.clone();
    let mix = |row: &mut Vec<f64>, rng: &mut R| {
        let noise = random_simplex(row.len(), rng);
        for (p, q) in row.iter_mut().zip(noise) {
            *p = (1.0 - amount) * *p + amount * q;
        }
    };
    for row in &mut m.transitions {
        mix(row, rng);
    }
    for table in &mut m.emissions {
        for row in table.iter_mut() {
            mix(row, rng);
        }
    }
    m
}

/// How the starting model of a restart is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartPlan {
    pub n_states: usize,
    /// Bucketing spreads for odometry-based initialization.
    pub bucket: BucketConfig,
    /// Jitter applied to the initialized model on restarts after the first.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub restart: usize,
    pub model: GeoHmm,
    pub report: LearnReport,
}

/// Initial model for restart `r` of a run on `e`.
pub fn initial_model(
    e: &ExperienceSequence,
    obs_dims: &[usize],
    cfg: &LearnConfig,
    plan: &RestartPlan,
    restart: usize,
    seed: u64,
) -> Result<GeoHmm> {
    let mut rng = rng_for(seed, STREAM_INIT + restart as u64);
    if cfg.use_odometry {
        let base = init_model(e, plan.n_states, obs_dims, cfg.mode, &plan.bucket)?;
        Ok(if restart == 0 { base } else { jitter_model(&base, plan.jitter, &mut rng) })
    } else {
        let var = plan.bucket.sigma_x.max(plan.bucket.sigma_y).powi(2);
        Ok(random_model(plan.n_states, obs_dims, cfg.mode, var, &mut rng))
    }
}

/// Runs `restarts` independent learning runs in parallel.
pub fn learn_restarts(
    e: &ExperienceSequence,
    obs_dims: &[usize],
    cfg: &LearnConfig,
    plan: &RestartPlan,
    restarts: usize,
    seed: u64,
) -> Result<Vec<RunResult>> {
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = initial_model(e, obs_dims, cfg, plan, r, seed)?;
            let (model, report) = em_learn(e, &init, cfg)?;
            Ok(RunResult { restart: r, model, report })
        })
        .collect()
}

/// Restarts from a given model: run 0 starts from `initial` itself and the
/// others from jittered copies.
pub fn learn_restarts_from(
    e: &ExperienceSequence,
    initial: &GeoHmm,
    cfg: &LearnConfig,
    jitter: f64,
    restarts: usize,
    seed: u64,
) -> Result<Vec<RunResult>> {
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                initial.clone()
            } else {
                jitter_model(initial, jitter, &mut rng_for(seed, STREAM_INIT + r as u64))
            };
            let (model, report) = em_learn(e, &init, cfg)?;
            Ok(RunResult { restart: r, model, report })
        })
        .collect()
}

/// Index of the run with the highest final log-likelihood (first on ties).
pub fn best_run(runs: &[RunResult]) -> Option<usize> {
    (0..runs.len()).fold(None, |best, k| match best {
        Some(b) if runs[b].report.final_loglik() >= runs[k].report.final_loglik() => Some(b),
        _ => Some(k),
    })
}

/// Welch's two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

pub fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(GeoError::Input("each sample needs at least two values".into()));
    }
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se = (sa + sb).sqrt();
    if se == 0.0 {
        let p = if ma == mb { 1.0 } else { 0.0 };
        return Ok(WelchTest { t: if ma == mb { 0.0 } else { f64::INFINITY.copysign(ma - mb) }, df: f64::NAN, p_value: p });
    }
    let t = (ma - mb) / se;
    let df = (sa + sb).powi(2) / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| GeoError::Domain(e.to_string()))?;
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(WelchTest { t, df, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub environment: LoopSpec,
    pub n_sequences: usize,
    pub seq_length: usize,
    pub restarts: usize,
    pub seed: u64,
    pub kl_length: usize,
    pub kl_sequences: usize,
    pub learn: LearnConfig,
    pub bucket: BucketConfig,
    pub jitter: f64,
}

/// Probability floor used by experiments. It bounds the penalty a learned
/// model pays for an event it never saw in training.
pub const EXPERIMENT_PROB_FLOOR: f64 = 2e-4;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let environment = LoopSpec::default();
        let learn = LearnConfig { mode: environment.mode, prob_floor: EXPERIMENT_PROB_FLOOR, ..Default::default() };
        let bucket = BucketConfig::new(environment.sigma_x, environment.sigma_y, 0.1);
        Self {
            environment,
            n_sequences: 5,
            seq_length: 800,
            restarts: 10,
            seed: 1,
            kl_length: DEFAULT_KL_LENGTH,
            kl_sequences: DEFAULT_KL_SEQUENCES,
            learn,
            bucket,
            jitter: 0.1,
        }
    }
}

/// One learning run inside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub sequence: usize,
    pub prefix: usize,
    pub restart: usize,
    pub odometry: bool,
    pub kl: KlEstimate,
    pub iterations: usize,
    pub converged: bool,
    pub final_loglik: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub runs: usize,
    pub mean_kl: f64,
    pub sd_kl: f64,
    pub mean_iterations: f64,
    pub converged: usize,
}

fn summarize<'a>(runs: impl Iterator<Item = &'a CellRun>) -> ConditionSummary {
    let runs: Vec<&CellRun> = runs.collect();
    let kl: Vec<f64> = runs.iter().map(|r| r.kl.value).collect();
    let (mean_kl, var) = mean_and_var(&kl);
    ConditionSummary {
        runs: runs.len(),
        mean_kl,
        sd_kl: var.sqrt(),
        mean_iterations: runs.iter().map(|r| r.iterations as f64).sum::<f64>() / runs.len().max(1) as f64,
        converged: runs.iter().filter(|r| r.converged).count(),
    }
}

impl ExperimentConfig {
    fn plan(&self) -> RestartPlan {
        RestartPlan { n_states: self.environment.n_states(), bucket: self.bucket, jitter: self.jitter }
    }

    fn learn_cfg(&self, odometry: bool) -> LearnConfig {
        LearnConfig { use_odometry: odometry, mode: self.environment.mode, ..self.learn.clone() }
    }

    /// The ground-truth model and the training sequences.
    pub fn data(&self) -> Result<(GeoHmm, Vec<ExperienceSequence>)> {
        let truth = make_loop_model(&self.environment)?;
        let seqs = (0..self.n_sequences)
            .map(|s| sample_sequence(&truth, self.seq_length, &mut rng_for(self.seed, STREAM_DATA + s as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok((truth, seqs))
    }

    fn run_cell(
        &self,
        truth: &GeoHmm,
        e: &ExperienceSequence,
        (sequence, prefix, restart, odometry): (usize, usize, usize, bool),
    ) -> Result<CellRun> {
        let cfg = self.learn_cfg(odometry);
        let data = e.prefix(prefix);
        let job_seed = self.seed ^ ((sequence as u64) << 40) ^ ((prefix as u64) << 20);
        let init = initial_model(&data, &truth.obs_dims, &cfg, &self.plan(), restart, job_seed)?;
        let (model, report) = em_learn(&data, &init, &cfg)?;
        // both conditions are scored on the same evaluation sequences
        let mut eval_rng = rng_for(self.seed, STREAM_EVAL + ((sequence as u64) << 16) + restart as u64);
        let kl = kl_sampled(truth, &model, self.kl_length, self.kl_sequences, &mut eval_rng)?;
        Ok(CellRun {
            sequence,
            prefix,
            restart,
            odometry,
            kl,
            iterations: report.iterations_run,
            converged: report.converged,
            final_loglik: report.final_loglik(),
            monotone: report.is_monotone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub with_odometry: ConditionSummary,
    pub without_odometry: ConditionSummary,
    pub kl_ratio: f64,
    pub test: WelchTest,
    pub runs: Vec<CellRun>,
}

/// Learns every sequence `restarts` times with and without odometry and
/// compares the sampled divergences from the true model.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<Comparison> {
    let (truth, seqs) = cfg.data()?;
    let jobs: Vec<_> = (0..cfg.n_sequences)
        .flat_map(|s| (0..cfg.restarts).flat_map(move |r| [(s, r, true), (s, r, false)]))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(s, r, odo)| cfg.run_cell(&truth, &seqs[s], (s, cfg.seq_length, r, odo)))
        .collect::<Result<Vec<_>>>()?;
    let with_odometry = summarize(runs.iter().filter(|r| r.odometry));
    let without_odometry = summarize(runs.iter().filter(|r| !r.odometry));
    let a: Vec<f64> = runs.iter().filter(|r| r.odometry).map(|r| r.kl.value).collect();
    let b: Vec<f64> = runs.iter().filter(|r| !r.odometry).map(|r| r.kl.value).collect();
    let test = welch_t_test(&a, &b)?;
    Ok(Comparison {
        kl_ratio: with_odometry.mean_kl / without_odometry.mean_kl,
        with_odometry,
        without_odometry,
        test,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub prefix: usize,
    pub with_odometry: ConditionSummary,
    pub without_odometry: ConditionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<CellRun>,
}

impl Sweep {
    pub fn row(&self, prefix: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.prefix == prefix)
    }
}

/// Learns from prefixes of the first sequence, `cfg.restarts` runs per
/// prefix and condition.
pub fn prefix_sweep(cfg: &ExperimentConfig, prefixes: &[usize]) -> Result<Sweep> {
    if prefixes.iter().any(|&p| p < 2 || p > cfg.seq_length) {
        return Err(GeoError::Input("prefix lengths must lie in [2, seq_length]".into()));
    }
    let (truth, seqs) = ExperimentConfig { n_sequences: 1, ..cfg.clone() }.data()?;
    let jobs: Vec<_> = prefixes
        .iter()
        .flat_map(|&p| (0..cfg.restarts).flat_map(move |r| [(p, r, true), (p, r, false)]))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(p, r, odo)| cfg.run_cell(&truth, &seqs[0], (0, p, r, odo)))
        .collect::<Result<Vec<_>>>()?;
    let rows = prefixes
        .iter()
        .map(|&p| SweepRow {
            prefix: p,
            with_odometry: summarize(runs.iter().filter(|r| r.prefix == p && r.odometry)),
            without_odometry: summarize(runs.iter().filter(|r| r.prefix == p && !r.odometry)),
        })
        .collect();
    Ok(Sweep { rows, runs })
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<18} {:>5} {:>12} {:>12} {:>10} {:>10}", "condition", "runs", "mean KL", "sd KL", "mean iter", "converged")?;
        for (name, s) in [("with odometry", &self.with_odometry), ("without odometry", &self.without_odometry)] {
            writeln!(
                f,
                "{:<18} {:>5} {:>12.6} {:>12.6} {:>10.1} {:>10}",
                name, s.runs, s.mean_kl, s.sd_kl, s.mean_iterations, s.converged
            )?;
        }
        writeln!(f, "KL ratio (with / without): {:.4}", self.kl_ratio)?;
        writeln!(f, "Welch t = {:.4}, df = {:.1}, p = {:.3e}", self.test.t, self.test.df, self.test.p_value)
    }
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:>7} {:>14} {:>14} {:>12} {:>12}", "prefix", "KL with", "KL without", "iter with", "iter w/o")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>7} {:>14.6} {:>14.6} {:>12.1} {:>12.1}",
                r.prefix,
                r.with_odometry.mean_kl,
                r.without_odometry.mean_kl,
                r.with_odometry.mean_iterations,
                r.without_odometry.mean_iterations
            )?;
        }
        Ok(())
    }
}
