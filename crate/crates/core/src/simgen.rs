//! Monte Carlo sequences and synthetic corridor-loop environments.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circstats::vm_sample;
use crate::error::{GeoError, Result};
use crate::model::{
    embed_relations, CoordinateMode, ExperienceSequence, GeoHmm, Reading, RelationEntry, Step,
};

/// Draws an index from a discrete distribution.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left a sliver of mass; use the last supported index
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

fn sample_obs<R: Rng + ?Sized>(model: &GeoHmm, state: usize, rng: &mut R) -> Vec<usize> {
    model.emissions.iter().map(|table| sample_index(&table[state], rng)).collect()
}

fn sample_reading<R: Rng + ?Sized>(entry: &RelationEntry, rng: &mut R) -> Reading {
    let nx = Normal::new(entry.mu_x, entry.var_x.sqrt()).expect("variance is positive");
    let ny = Normal::new(entry.mu_y, entry.var_y.sqrt()).expect("variance is positive");
    let dx = nx.sample(rng);
    let dy = ny.sample(rng);
    let dtheta = vm_sample(entry.mu_theta, entry.kappa, rng);
    Reading::new(dx, dy, dtheta)
}

/// Samples a sequence of `length` steps together with its hidden states.
///
/// Per step the successor is drawn first, then its reading, then the
/// observation vector one dimension at a time.
pub fn sample_with_states<R: Rng + ?Sized>(
    model: &GeoHmm,
    length: usize,
    rng: &mut R,
) -> Result<(ExperienceSequence, Vec<usize>)> {
    if length == 0 {
        return Err(GeoError::Input("sequence length must be at least 1".into()));
    }
    model.validate()?;
    let mut state = model.start_state;
    let mut states = vec![state];
    let mut steps = vec![Step { obs: sample_obs(model, state, rng), reading: None }];
    for _ in 1..length {
        let next = sample_index(&model.transitions[state], rng);
        let reading = sample_reading(&model.relations[state][next], rng);
        state = next;
        states.push(state);
        steps.push(Step { obs: sample_obs(model, state, rng), reading: Some(reading) });
    }
    Ok((ExperienceSequence { steps }, states))
}

pub fn sample_sequence<R: Rng + ?Sized>(model: &GeoHmm, length: usize, rng: &mut R) -> Result<ExperienceSequence> {
    sample_with_states(model, length, rng).map(|(e, _)| e)
}

/// Observation symbols of the loop environment.
pub const OPEN: usize = 0;
pub const DOOR: usize = 1;
pub const WALL: usize = 2;
pub const UNKNOWN: usize = 3;

/// A closed loop of straight corridors joined by equal turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopSpec {
    pub corridor_lengths: Vec<f64>,
    pub states_per_corridor: Vec<usize>,
    /// Probability mass moved off the true symbol in every dimension.
    pub obs_noise: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub kappa: f64,
    pub p_forward: f64,
    pub p_skip: f64,
    pub mode: CoordinateMode,
}

impl Default for LoopSpec {
    fn default() -> Self {
        Self {
            corridor_lengths: vec![2000.0, 1000.0, 2000.0, 1000.0],
            states_per_corridor: vec![4; 4],
            obs_noise: 0.0,
            sigma_x: 40.0,
            sigma_y: 40.0,
            kappa: 200.0,
            p_forward: 0.6,
            p_skip: 0.0,
            mode: CoordinateMode::Relative,
        }
    }
}

impl LoopSpec {
    pub fn n_states(&self) -> usize {
        self.states_per_corridor.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.corridor_lengths.len();
        if c < 3 {
            return Err(GeoError::Input("a loop needs at least three corridors".into()));
        }
        if self.states_per_corridor.len() != c {
            return Err(GeoError::Input("one state count per corridor is required".into()));
        }
        if self.corridor_lengths.iter().any(|l| !(*l > 0.0 && l.is_finite()))
            || self.states_per_corridor.iter().any(|n| *n == 0)
        {
            return Err(GeoError::Input("corridor lengths and state counts must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.obs_noise) {
            return Err(GeoError::Input("observation noise must lie in [0, 1)".into()));
        }
        if !(self.sigma_x > 0.0 && self.sigma_y > 0.0 && self.kappa >= 0.0) {
            return Err(GeoError::Input("odometric noise must be positive".into()));
        }
        if !(self.p_forward > 0.0 && self.p_skip >= 0.0 && self.p_forward + self.p_skip <= 1.0) {
            return Err(GeoError::Input("transition probabilities must form a distribution".into()));
        }
        let (mut x, mut y) = (0.0, 0.0);
        let mut scale: f64 = 0.0;
        for (k, len) in self.corridor_lengths.iter().enumerate() {
            let h = k as f64 * TAU / c as f64;
            x -= len * h.sin();
            y += len * h.cos();
            scale = scale.max(*len);
        }
        if x.hypot(y) > 1e-9 * scale {
            return Err(GeoError::Input(format!("corridors do not close: end point ({x:.6}, {y:.6})")));
        }
        Ok(())
    }
}

/// Per-state poses `(x, y, θ)` of the loop, corridor by corridor.
pub fn loop_poses(spec: &LoopSpec) -> Vec<(f64, f64, f64)> {
    let c = spec.corridor_lengths.len();
    let mut poses = Vec::with_capacity(spec.n_states());
    let (mut cx, mut cy) = (0.0, 0.0);
    for (k, (&len, &m)) in spec.corridor_lengths.iter().zip(&spec.states_per_corridor).enumerate() {
        let h = k as f64 * TAU / c as f64;
        let dir = (-h.sin(), h.cos());
        for s in 0..m {
            let f = len * s as f64 / m as f64;
            poses.push((cx + f * dir.0, cy + f * dir.1, h));
        }
        cx += len * dir.0;
        cy += len * dir.1;
    }
    poses
}

/// True `[front, left, right]` symbols of every state.
///
/// Inside a corridor the robot sees open space ahead and walls on both
/// sides; the last state faces a wall with the next corridor opening to the
/// left. A single door on the right of the second state of corridor 0 is the
/// only landmark, so most of the loop looks the same from every corridor.
pub fn loop_symbols(spec: &LoopSpec) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(spec.n_states());
    for (k, &m) in spec.states_per_corridor.iter().enumerate() {
        for s in 0..m {
            let end = s + 1 == m;
            let front = if end { WALL } else { OPEN };
            let left = if end { OPEN } else { WALL };
            let right = if k == 0 && s == 1 && !end { DOOR } else { WALL };
            out.push([front, left, right]);
        }
    }
    out
}

/// Builds the loop environment: forward, skip-one and self transitions,
/// noisy `[front, left, right]` observations over four symbols and an
/// exactly additive relation matrix.
pub fn make_loop_model(spec: &LoopSpec) -> Result<GeoHmm> {
    spec.validate()?;
    let n = spec.n_states();
    let poses = loop_poses(spec);
    let x: Vec<f64> = poses.iter().map(|p| p.0).collect();
    let y: Vec<f64> = poses.iter().map(|p| p.1).collect();
    let th: Vec<f64> = poses.iter().map(|p| p.2).collect();
    let means = embed_relations(&x, &y, &th, spec.mode);

    let mut transitions = vec![vec![0.0; n]; n];
    let p_self = (1.0 - spec.p_forward - spec.p_skip).max(0.0);
    for (i, row) in transitions.iter_mut().enumerate() {
        row[i] += p_self;
        row[(i + 1) % n] += spec.p_forward;
        row[(i + 2) % n] += spec.p_skip;
    }

    let symbols = loop_symbols(spec);
    let emissions = (0..3)
        .map(|d| {
            symbols
                .iter()
                .map(|sym| {
                    let mut col = vec![spec.obs_noise / 3.0; 4];
                    col[sym[d]] = 1.0 - spec.obs_noise;
                    col
                })
                .collect()
        })
        .collect();

    let relations = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| RelationEntry::new(means[i][j], spec.sigma_x.powi(2), spec.sigma_y.powi(2), spec.kappa))
                .collect()
        })
        .collect();
    let model = GeoHmm { obs_dims: vec![4; 3], transitions, emissions, start_state: 0, relations, mode: spec.mode };
    model.validate()?;
    Ok(model)
}
