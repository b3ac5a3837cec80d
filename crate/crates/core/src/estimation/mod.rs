//! M-step updates and the EM driver.

mod additive;
mod discrete;
mod relations;
mod two_normal;

pub use additive::{
    headings_of, project_headings, project_headings_from, solve_positions, update_relations_additive, Edge,
    HeadingProjection,
};
pub use discrete::{floored_normalize, update_observations, update_transitions};
pub use relations::{
    pair_stats, update_relations_antisym, update_relations_unconstrained, PairStats, RelationGuards,
};
pub use two_normal::{constrained_two_normal_mle, TwoNormalFit};

use serde::{Deserialize, Serialize};

use crate::circstats::KAPPA_MAX;
use crate::error::{GeoError, Result};
use crate::inference::{e_step, InferenceOptions, Posteriors};
use crate::model::{check_consistency, ConstraintLevel, CoordinateMode, ExperienceSequence, GeoHmm, VAR_FLOOR};

/// Tolerance used when recording constraint residuals after each M-step.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub constraint_level: ConstraintLevel,
    pub mode: CoordinateMode,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub var_floor: f64,
    pub kappa_max: f64,
    /// Lower bound on every transition and emission probability.
    pub prob_floor: f64,
    /// Pairs with at least this expected transition count keep their heading
    /// estimate exactly during additive projection.
    pub held_weight_threshold: f64,
    pub min_pair_weight: f64,
    /// False runs plain Baum-Welch: readings are ignored and `R` is left as is.
    pub use_odometry: bool,
    /// Anti-symmetric iterations run before switching to additive updates.
    pub antisym_warmup: usize,
    pub log_density_floor: Option<f64>,
    pub rng_seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            constraint_level: ConstraintLevel::Additive,
            mode: CoordinateMode::Global,
            max_iters: 200,
            rel_tol: 1e-6,
            var_floor: VAR_FLOOR,
            kappa_max: KAPPA_MAX,
            prob_floor: 1e-6,
            held_weight_threshold: 1.0,
            min_pair_weight: 1e-9,
            use_odometry: true,
            antisym_warmup: 0,
            log_density_floor: None,
            rng_seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(GeoError::Input("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(GeoError::Input("rel_tol must be positive".into()));
        }
        if !(self.var_floor > 0.0) || !(self.kappa_max > 0.0) {
            return Err(GeoError::Input("var_floor and kappa_max must be positive".into()));
        }
        if !(self.prob_floor >= 0.0 && self.prob_floor < 1.0) {
            return Err(GeoError::Input("prob_floor must lie in [0, 1)".into()));
        }
        if !(self.held_weight_threshold >= 0.0) || !(self.min_pair_weight >= 0.0) {
            return Err(GeoError::Input("thresholds must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn guards(&self) -> RelationGuards {
        RelationGuards { var_floor: self.var_floor, kappa_max: self.kappa_max, min_weight: self.min_pair_weight }
    }

    pub fn inference(&self) -> InferenceOptions {
        InferenceOptions { use_odometry: self.use_odometry, log_density_floor: self.log_density_floor }
    }

    /// Constraint level applied at iteration `iter` (1-based).
    pub fn level_at(&self, iter: usize) -> ConstraintLevel {
        if self.constraint_level == ConstraintLevel::Additive && iter <= self.antisym_warmup {
            ConstraintLevel::AntiSymmetric
        } else {
            self.constraint_level
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnReport {
    pub iterations_run: usize,
    /// Log-likelihood of the initial model followed by one value per iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    /// `(iteration, drop)` for every iteration whose log-likelihood fell by
    /// more than `1e-8` relative.
    pub monotonicity_violations: Vec<(usize, f64)>,
    /// Largest constraint violation after each M-step.
    pub constraint_residuals: Vec<f64>,
}

impl LearnReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }

    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }
}

/// One M-step. `level` selects the relation update; it is ignored when
/// odometry is off.
pub fn m_step(
    model: &GeoHmm,
    post: &Posteriors,
    e: &ExperienceSequence,
    cfg: &LearnConfig,
    level: ConstraintLevel,
) -> GeoHmm {
    let mut next = model.clone();
    next.transitions = update_transitions(post, &model.transitions, cfg.prob_floor);
    next.emissions = update_observations(post, e, &model.emissions, cfg.prob_floor);
    if cfg.use_odometry {
        let guards = cfg.guards();
        next.relations = match level {
            ConstraintLevel::Unconstrained => update_relations_unconstrained(post, e, &model.relations, &guards),
            ConstraintLevel::AntiSymmetric => {
                update_relations_antisym(post, e, &model.relations, cfg.mode, &guards)
            }
            ConstraintLevel::Additive => {
                let reference = check_consistency(model, ConstraintLevel::Additive, CONSTRAINT_TOL)
                    .is_consistent()
                    .then(|| headings_of(&model.relations));
                update_relations_additive(
                    post,
                    e,
                    &model.relations,
                    cfg.mode,
                    &guards,
                    cfg.held_weight_threshold,
                    reference.as_deref(),
                )
            }
        };
    }
    next
}

/// Runs EM from `initial` until the relative log-likelihood gain drops below
/// `rel_tol` or `max_iters` iterations have run.
pub fn em_learn(e: &ExperienceSequence, initial: &GeoHmm, cfg: &LearnConfig) -> Result<(GeoHmm, LearnReport)> {
    cfg.validate()?;
    initial.validate()?;
    initial.check_sequence(e)?;
    if initial.mode != cfg.mode && cfg.use_odometry {
        return Err(GeoError::Input("model and config disagree on coordinate mode".into()));
    }
    let opts = cfg.inference();
    let mut model = initial.clone();
    let (trellis, mut post) = e_step(&model, e, opts)?;
    let mut report = LearnReport {
        iterations_run: 0,
        loglik_trace: vec![trellis.loglik],
        converged: false,
        monotonicity_violations: Vec::new(),
        constraint_residuals: Vec::new(),
    };
    for iter in 1..=cfg.max_iters {
        let level = cfg.level_at(iter);
        model = m_step(&model, &post, e, cfg, level);
        let residual = if cfg.use_odometry {
            check_consistency(&model, level, CONSTRAINT_TOL).max_magnitude()
        } else {
            0.0
        };
        report.constraint_residuals.push(residual);
        let (trellis, next_post) = e_step(&model, e, opts)?;
        post = next_post;
        let prev = report.final_loglik();
        let ll = trellis.loglik;
        report.loglik_trace.push(ll);
        report.iterations_run = iter;
        let scale = prev.abs().max(f64::MIN_POSITIVE);
        if prev - ll > 1e-8 * scale {
            report.monotonicity_violations.push((iter, prev - ll));
        }
        // a warm-up switch can briefly lower the likelihood; never stop on it
        if (ll - prev) / scale < cfg.rel_tol && ll >= prev && level == cfg.constraint_level {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Reading, RelationEntry, Step};

    fn toy() -> (GeoHmm, ExperienceSequence) {
        let mut model = GeoHmm::uniform(2, &[2], CoordinateMode::Global, 1.0);
        model.transitions = vec![vec![0.2, 0.8], vec![0.7, 0.3]];
        model.emissions = vec![vec![vec![0.6, 0.4], vec![0.3, 0.7]]];
        model.relations[0][1] = RelationEntry::new((1.0, 0.5, 0.2), 1.0, 1.0, 2.0);
        model.relations[1][0] = RelationEntry::new((-1.0, -0.5, -0.2), 1.0, 1.0, 2.0);
        let steps = (0..30)
            .map(|t| Step {
                obs: vec![(t * 7 % 3 == 0) as usize],
                reading: (t > 0).then(|| {
                    let s = if t % 2 == 1 { 1.0 } else { -1.0 };
                    Reading::new(s * (1.0 + 0.1 * (t % 5) as f64), s * 0.4, s * 0.25)
                }),
            })
            .collect();
        (model, ExperienceSequence::new(steps).unwrap())
    }

    #[test]
    fn trace_shape_and_monotone() {
        let (model, e) = toy();
        for level in [ConstraintLevel::Unconstrained, ConstraintLevel::AntiSymmetric, ConstraintLevel::Additive] {
            let cfg = LearnConfig { constraint_level: level, max_iters: 25, ..Default::default() };
            let (_, rep) = em_learn(&e, &model, &cfg).unwrap();
            assert_eq!(rep.loglik_trace.len(), rep.iterations_run + 1);
            assert_eq!(rep.constraint_residuals.len(), rep.iterations_run);
            assert!(rep.is_monotone(), "{level:?}: {:?}", rep.monotonicity_violations);
            assert!(rep.constraint_residuals.iter().all(|r| *r <= CONSTRAINT_TOL));
        }
    }

    #[test]
    fn without_odometry_relations_untouched() {
        let (model, e) = toy();
        let cfg = LearnConfig { use_odometry: false, max_iters: 10, ..Default::default() };
        let (learned, _) = em_learn(&e, &model, &cfg).unwrap();
        assert_eq!(learned.relations, model.relations);
    }

    #[test]
    fn rejects_bad_config() {
        let (model, e) = toy();
        let cfg = LearnConfig { max_iters: 0, ..Default::default() };
        assert!(em_learn(&e, &model, &cfg).is_err());
        let cfg = LearnConfig { rel_tol: 0.0, ..Default::default() };
        assert!(em_learn(&e, &model, &cfg).is_err());
    }
}
