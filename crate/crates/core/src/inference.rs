//! Scaled forward/backward recursions with relation densities.
//!
//! All recursions run in the log domain: per step the forward row is
//! normalized and the log of its normalizer is kept as the step's scale, so
//! the sequence log-likelihood is the sum of the log scales. Relation
//! densities can be far above or below 1, which rules out plain
//! probability-space scaling.

use crate::error::{GeoError, Result};
use crate::model::{ExperienceSequence, GeoHmm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOptions {
    /// When false every relation density factor is replaced by 1.
    pub use_odometry: bool,
    /// Optional lower bound on log relation densities (off by default).
    pub log_density_floor: Option<f64>,
}

impl InferenceOptions {
    pub fn new(use_odometry: bool) -> Self {
        Self { use_odometry, log_density_floor: None }
    }
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self::new(true)
    }
}

/// Probability of observation vector `v` in `state`.
pub fn obs_prob(model: &GeoHmm, state: usize, v: &[usize]) -> Result<f64> {
    if state >= model.n_states() {
        return Err(GeoError::Input(format!("state {state} out of range")));
    }
    if v.len() != model.n_dims() {
        return Err(GeoError::Input(format!(
            "observation has {} values, model has {} dimensions",
            v.len(),
            model.n_dims()
        )));
    }
    let mut p = 1.0;
    for (d, &o) in v.iter().enumerate() {
        if o >= model.obs_dims[d] {
            return Err(GeoError::Input(format!(
                "symbol {o} outside alphabet of size {} in dimension {d}",
                model.obs_dims[d]
            )));
        }
        p *= model.emissions[d][state][o];
    }
    Ok(p)
}

/// Per-step log emission and log relation-density terms.
#[derive(Debug, Clone)]
struct StepTerms {
    n: usize,
    /// `log_obs[t * n + j]`
    log_obs: Vec<f64>,
    /// `log_rel[(t - 1) * n * n + i * n + j]`, empty without odometry.
    log_rel: Vec<f64>,
    /// `log_trans[i * n + j]`
    log_trans: Vec<f64>,
}

impl StepTerms {
    fn build(model: &GeoHmm, e: &ExperienceSequence, opts: InferenceOptions) -> Result<Self> {
        model.check_sequence(e)?;
        let n = model.n_states();
        let t_len = e.len();
        let mut log_obs = vec![0.0; t_len * n];
        for (t, step) in e.steps.iter().enumerate() {
            for j in 0..n {
                let mut lp = 0.0;
                for (d, &o) in step.obs.iter().enumerate() {
                    lp += model.emissions[d][j][o].ln();
                }
                log_obs[t * n + j] = lp;
            }
        }
        let mut log_rel = Vec::new();
        if opts.use_odometry && t_len > 1 {
            log_rel = vec![0.0; (t_len - 1) * n * n];
            for t in 1..t_len {
                let r = e.reading(t);
                let base = (t - 1) * n * n;
                for i in 0..n {
                    for j in 0..n {
                        let mut lf = model.relations[i][j].log_density(r);
                        if let Some(floor) = opts.log_density_floor {
                            lf = lf.max(floor);
                        }
                        log_rel[base + i * n + j] = lf;
                    }
                }
            }
        }
        let log_trans = model.transitions.iter().flatten().map(|p| p.ln()).collect();
        Ok(Self { n, log_obs, log_rel, log_trans })
    }

    #[inline]
    fn obs(&self, t: usize, j: usize) -> f64 {
        self.log_obs[t * self.n + j]
    }

    /// `log A_ij + log f(r_t | R_ij)` for the transition into step `t`.
    #[inline]
    fn edge(&self, t: usize, i: usize, j: usize) -> f64 {
        let a = self.log_trans[i * self.n + j];
        if self.log_rel.is_empty() {
            a
        } else {
            a + self.log_rel[(t - 1) * self.n * self.n + i * self.n + j]
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Scaled forward and backward tables.
#[derive(Debug, Clone)]
pub struct Trellis {
    /// Normalized log forward values; `exp` of each row sums to 1.
    pub log_alpha: Vec<Vec<f64>>,
    /// Log backward values scaled by the same per-step factors.
    pub log_beta: Vec<Vec<f64>>,
    /// Log of each step's forward normalizer.
    pub log_scales: Vec<f64>,
    pub loglik: f64,
    use_odometry: bool,
    terms: StepTerms,
}

impl Trellis {
    pub fn len(&self) -> usize {
        self.log_alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_alpha.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.terms.n
    }

    /// Scaled forward probability.
    pub fn alpha(&self, t: usize, i: usize) -> f64 {
        self.log_alpha[t][i].exp()
    }

    pub fn uses_odometry(&self) -> bool {
        self.use_odometry
    }
}

fn forward(
    model: &GeoHmm,
    terms: &StepTerms,
    t_len: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = model.n_states();
    let mut log_alpha = vec![vec![f64::NEG_INFINITY; n]; t_len];
    let mut log_scales = vec![0.0; t_len];
    log_alpha[0][model.start_state] = terms.obs(0, model.start_state);
    for t in 0..t_len {
        if t > 0 {
            let (prev_rows, rest) = log_alpha.split_at_mut(t);
            let prev = &prev_rows[t - 1];
            let row = &mut rest[0];
            for (j, cell) in row.iter_mut().enumerate() {
                let acc = log_sum_exp((0..n).map(|i| prev[i] + terms.edge(t, i, j)));
                *cell = acc + terms.obs(t, j);
            }
        }
        let c = log_sum_exp(log_alpha[t].iter().copied());
        if !c.is_finite() {
            return Err(GeoError::ImpossibleSequence { step: t });
        }
        log_scales[t] = c;
        for v in log_alpha[t].iter_mut() {
            *v -= c;
        }
    }
    Ok((log_alpha, log_scales))
}

/// Runs the scaled forward and backward passes.
pub fn forward_backward(model: &GeoHmm, e: &ExperienceSequence, use_odometry: bool) -> Result<Trellis> {
    forward_backward_with(model, e, InferenceOptions::new(use_odometry))
}

pub fn forward_backward_with(
    model: &GeoHmm,
    e: &ExperienceSequence,
    opts: InferenceOptions,
) -> Result<Trellis> {
    if e.is_empty() {
        return Err(GeoError::Input("experience sequence is empty".into()));
    }
    let terms = StepTerms::build(model, e, opts)?;
    let t_len = e.len();
    let n = model.n_states();
    let (log_alpha, log_scales) = forward(model, &terms, t_len)?;
    let mut log_beta = vec![vec![0.0; n]; t_len];
    for t in (0..t_len.saturating_sub(1)).rev() {
        let (head, tail) = log_beta.split_at_mut(t + 1);
        let next = &tail[0];
        let row = &mut head[t];
        for (i, cell) in row.iter_mut().enumerate() {
            let acc = log_sum_exp((0..n).map(|j| terms.edge(t + 1, i, j) + terms.obs(t + 1, j) + next[j]));
            *cell = acc - log_scales[t + 1];
        }
    }
    let loglik = log_scales.iter().sum();
    Ok(Trellis { log_alpha, log_beta, log_scales, loglik, use_odometry: opts.use_odometry, terms })
}

/// Sequence log-likelihood from the forward pass alone.
pub fn log_likelihood(model: &GeoHmm, e: &ExperienceSequence, use_odometry: bool) -> Result<f64> {
    if e.is_empty() {
        return Err(GeoError::Input("experience sequence is empty".into()));
    }
    let terms = StepTerms::build(model, e, InferenceOptions::new(use_odometry))?;
    let (_, scales) = forward(model, &terms, e.len())?;
    Ok(scales.iter().sum())
}

/// State-occupation (γ) and state-transition (ξ) posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    /// `gamma[t][i] = Pr(q_t = i | E)`
    pub gamma: Vec<Vec<f64>>,
    /// `xi[t][i][j] = Pr(q_t = i, q_{t+1} = j | E)`, paired with reading `r_{t+1}`.
    pub xi: Vec<Vec<Vec<f64>>>,
}

impl Posteriors {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.gamma.first().map_or(0, Vec::len)
    }

    /// Expected transition counts `Σ_t ξ_t(i, j)`.
    pub fn transition_counts(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        let mut c = vec![vec![0.0; n]; n];
        for slab in &self.xi {
            for (crow, srow) in c.iter_mut().zip(slab) {
                for (cv, sv) in crow.iter_mut().zip(srow) {
                    *cv += sv;
                }
            }
        }
        c
    }
}

/// Computes γ and ξ from a trellis built on the same model and sequence.
pub fn posteriors(
    trellis: &Trellis,
    model: &GeoHmm,
    e: &ExperienceSequence,
    use_odometry: bool,
) -> Result<Posteriors> {
    let n = model.n_states();
    if trellis.len() != e.len() || trellis.n_states() != n || trellis.use_odometry != use_odometry {
        return Err(GeoError::Input("trellis does not match model, sequence or odometry flag".into()));
    }
    let terms = &trellis.terms;
    let t_len = e.len();
    let gamma = (0..t_len)
        .map(|t| {
            let logs: Vec<f64> = (0..n).map(|i| trellis.log_alpha[t][i] + trellis.log_beta[t][i]).collect();
            let z = log_sum_exp(logs.iter().copied());
            logs.iter().map(|v| (v - z).exp()).collect()
        })
        .collect();
    let mut xi = Vec::with_capacity(t_len.saturating_sub(1));
    let mut slab = vec![0.0; n * n];
    for t in 0..t_len.saturating_sub(1) {
        for i in 0..n {
            for j in 0..n {
                slab[i * n + j] = trellis.log_alpha[t][i]
                    + terms.edge(t + 1, i, j)
                    + terms.obs(t + 1, j)
                    + trellis.log_beta[t + 1][j];
            }
        }
        let z = log_sum_exp(slab.iter().copied());
        xi.push(
            (0..n)
                .map(|i| (0..n).map(|j| (slab[i * n + j] - z).exp()).collect())
                .collect(),
        );
    }
    Ok(Posteriors { gamma, xi })
}

/// Forward/backward followed by posteriors.
pub fn e_step(model: &GeoHmm, e: &ExperienceSequence, opts: InferenceOptions) -> Result<(Trellis, Posteriors)> {
    let trellis = forward_backward_with(model, e, opts)?;
    let post = posteriors(&trellis, model, e, opts.use_odometry)?;
    Ok((trellis, post))
}
