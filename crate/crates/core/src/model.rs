//! Model data structures, coordinate frames and geometric consistency.
//!
//! A [`GeoHmm`] is an HMM with a designated start state, factored discrete
//! observations and a relation matrix `R` whose entry `(i, j)` describes the
//! odometric displacement recorded when moving from state `i` to state `j`.
//!
//! Frame convention: a state's heading θ = 0 faces the +y axis and headings
//! grow counter-clockwise. In [`CoordinateMode::Relative`] the `(x, y)` part
//! of `R[i][j]` is expressed in the frame of state `i` (y along its heading),
//! and a vector written in the frame of state `b` is brought into the frame
//! of state `a` by [`transform_point`] with the heading change `μθ(a, b)`.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circstats::{angle_diff, clamp_kappa, vm_log_density, wrap_angle};
use crate::error::{GeoError, Result};

/// Smallest admissible variance for the x and y relation components.
pub const VAR_FLOOR: f64 = 1e-6;

/// Concentration given to diagonal (self-transition) entries by default.
pub const DIAGONAL_KAPPA: f64 = 50.0;

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateMode {
    Global,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintLevel {
    #[serde(alias = "none")]
    Unconstrained,
    #[serde(alias = "antisym")]
    AntiSymmetric,
    Additive,
}

/// Odometric displacement `(Δx, Δy, Δθ)` between consecutive states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Reading {
    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self { dx, dy, dtheta }
    }
}

/// Parameters of the relation between an ordered pair of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_theta: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub kappa: f64,
}

impl RelationEntry {
    pub fn new(mu: (f64, f64, f64), var_x: f64, var_y: f64, kappa: f64) -> Self {
        Self {
            mu_x: mu.0,
            mu_y: mu.1,
            mu_theta: wrap_angle(mu.2),
            var_x: var_x.max(VAR_FLOOR),
            var_y: var_y.max(VAR_FLOOR),
            kappa: clamp_kappa(kappa),
        }
    }

    /// Zero-mean self relation.
    pub fn diagonal(var: f64) -> Self {
        Self::new((0.0, 0.0, 0.0), var, var, DIAGONAL_KAPPA)
    }

    pub fn mean(&self) -> (f64, f64, f64) {
        (self.mu_x, self.mu_y, self.mu_theta)
    }

    pub fn set_mean(&mut self, mu: (f64, f64, f64)) {
        self.mu_x = mu.0;
        self.mu_y = mu.1;
        self.mu_theta = wrap_angle(mu.2);
    }

    pub fn log_density(&self, r: &Reading) -> f64 {
        normal_log_density(r.dx, self.mu_x, self.var_x)
            + normal_log_density(r.dy, self.mu_y, self.var_y)
            + vm_log_density(r.dtheta, self.mu_theta, self.kappa)
    }
}

fn normal_log_density(x: f64, mu: f64, var: f64) -> f64 {
    let d = x - mu;
    -0.5 * (TAU * var).ln() - 0.5 * d * d / var
}

/// Density `f(r | R_ij)`: independent normals on Δx, Δy and a von Mises on Δθ.
pub fn relation_density(r: &Reading, entry: &RelationEntry) -> f64 {
    entry.log_density(r).exp()
}

/// Rotates `point` counter-clockwise by `mu_theta`.
///
/// With `mu_theta = μθ(a, b)` this maps a vector expressed in the frame of
/// state `b` into the frame of state `a`.
pub fn transform_point(mu_theta: f64, point: (f64, f64)) -> (f64, f64) {
    let (s, c) = mu_theta.sin_cos();
    (point.0 * c - point.1 * s, point.0 * s + point.1 * c)
}

/// Relation means induced by per-state coordinates.
///
/// Global: `μ(i,j) = p_j - p_i` per component. Relative: the planar
/// displacement is rotated by `-θ_i` into state `i`'s frame. Headings
/// always give `wrap(θ_j - θ_i)`.
pub fn embed_relations(
    x: &[f64],
    y: &[f64],
    theta: &[f64],
    mode: CoordinateMode,
) -> Vec<Vec<(f64, f64, f64)>> {
    let n = x.len();
    assert!(y.len() == n && theta.len() == n, "coordinate arrays differ in length");
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = (x[j] - x[i], y[j] - y[i]);
                    let d = match mode {
                        CoordinateMode::Global => d,
                        CoordinateMode::Relative if i == j => (0.0, 0.0),
                        CoordinateMode::Relative => transform_point(-theta[i], d),
                    };
                    let dt = if i == j { 0.0 } else { wrap_angle(theta[j] - theta[i]) };
                    (d.0, d.1, dt)
                })
                .collect()
        })
        .collect()
}

/// A complete model: transitions, factored observations, start state and
/// the relation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoHmm {
    /// Alphabet size of each observation dimension.
    pub obs_dims: Vec<usize>,
    /// `transitions[i][j] = Pr(q_{t+1} = j | q_t = i)`.
    pub transitions: Vec<Vec<f64>>,
    /// `emissions[d][j][o] = Pr(V_t[d] = o | q_t = j)`.
    pub emissions: Vec<Vec<Vec<f64>>>,
    pub start_state: usize,
    pub relations: Vec<Vec<RelationEntry>>,
    pub mode: CoordinateMode,
}

impl GeoHmm {
    pub fn n_states(&self) -> usize {
        self.transitions.len()
    }

    pub fn n_dims(&self) -> usize {
        self.obs_dims.len()
    }

    /// Uniform transitions and emissions, zero-mean relations.
    pub fn uniform(n: usize, obs_dims: &[usize], mode: CoordinateMode, var: f64) -> Self {
        let transitions = vec![vec![1.0 / n as f64; n]; n];
        let emissions = obs_dims
            .iter()
            .map(|&k| vec![vec![1.0 / k as f64; k]; n])
            .collect();
        let relations = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            RelationEntry::diagonal(var)
                        } else {
                            RelationEntry::new((0.0, 0.0, 0.0), var, var, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            obs_dims: obs_dims.to_vec(),
            transitions,
            emissions,
            start_state: 0,
            relations,
            mode,
        }
    }

    /// Checks shapes, stochasticity and relation guards.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if n == 0 {
            return Err(GeoError::Input("model has no states".into()));
        }
        if self.start_state >= n {
            return Err(GeoError::Input(format!(
                "start state {} out of range for {n} states",
                self.start_state
            )));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            check_distribution(row, n, &format!("transition row {i}"))?;
        }
        if self.emissions.len() != self.obs_dims.len() {
            return Err(GeoError::Input(format!(
                "{} emission tables for {} observation dimensions",
                self.emissions.len(),
                self.obs_dims.len()
            )));
        }
        for (d, (table, &k)) in self.emissions.iter().zip(&self.obs_dims).enumerate() {
            if k == 0 {
                return Err(GeoError::Input(format!("observation dimension {d} has empty alphabet")));
            }
            if table.len() != n {
                return Err(GeoError::Input(format!(
                    "emission table {d} has {} states, expected {n}",
                    table.len()
                )));
            }
            for (j, row) in table.iter().enumerate() {
                check_distribution(row, k, &format!("emission dim {d} state {j}"))?;
            }
        }
        if self.relations.len() != n || self.relations.iter().any(|r| r.len() != n) {
            return Err(GeoError::Input("relation matrix must be N×N".into()));
        }
        for (i, row) in self.relations.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let finite = [e.mu_x, e.mu_y, e.mu_theta, e.var_x, e.var_y, e.kappa]
                    .iter()
                    .all(|v| v.is_finite());
                if !finite {
                    return Err(GeoError::Input(format!("relation ({i},{j}) is not finite")));
                }
                if e.var_x < VAR_FLOOR * (1.0 - 1e-12) || e.var_y < VAR_FLOOR * (1.0 - 1e-12) {
                    return Err(GeoError::Input(format!("relation ({i},{j}) variance below floor")));
                }
                if e.kappa < 0.0 {
                    return Err(GeoError::Input(format!("relation ({i},{j}) has negative kappa")));
                }
            }
        }
        Ok(())
    }

    /// Checks that `e` uses this model's observation alphabets.
    pub fn check_sequence(&self, e: &ExperienceSequence) -> Result<()> {
        if e.obs_dims() != self.n_dims() {
            return Err(GeoError::Input(format!(
                "sequence has {} observation dimensions, model has {}",
                e.obs_dims(),
                self.n_dims()
            )));
        }
        for (t, step) in e.steps.iter().enumerate() {
            for (d, (&o, &k)) in step.obs.iter().zip(&self.obs_dims).enumerate() {
                if o >= k {
                    return Err(GeoError::Input(format!(
                        "step {t}: symbol {o} outside alphabet of size {k} in dimension {d}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Relation means as an N×N table.
    pub fn relation_means(&self) -> Vec<Vec<(f64, f64, f64)>> {
        self.relations
            .iter()
            .map(|row| row.iter().map(RelationEntry::mean).collect())
            .collect()
    }
}

fn check_distribution(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(GeoError::Input(format!("{what} has length {}, expected {len}", row.len())));
    }
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(GeoError::Input(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(GeoError::Input(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// One element of an experience sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub obs: Vec<usize>,
    /// Odometry since the previous step; absent on the first step.
    pub reading: Option<Reading>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperienceSequence {
    pub steps: Vec<Step>,
}

impl ExperienceSequence {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let seq = Self { steps };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn obs_dims(&self) -> usize {
        self.steps.first().map_or(0, |s| s.obs.len())
    }

    /// Reading recorded on arrival at step `t` (`t >= 1`).
    pub fn reading(&self, t: usize) -> &Reading {
        self.steps[t]
            .reading
            .as_ref()
            .expect("validated sequences carry readings on every step after the first")
    }

    /// All readings in order (length `T - 1`).
    pub fn readings(&self) -> Vec<Reading> {
        self.steps.iter().skip(1).map(|s| s.reading.unwrap()).collect()
    }

    /// The first `len` steps.
    pub fn prefix(&self, len: usize) -> Self {
        Self { steps: self.steps[..len.min(self.steps.len())].to_vec() }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.obs_dims();
        for (t, s) in self.steps.iter().enumerate() {
            if s.obs.len() != l {
                return Err(GeoError::Input(format!(
                    "step {t} has {} observation values, expected {l}",
                    s.obs.len()
                )));
            }
            match (t, &s.reading) {
                (0, Some(_)) => {
                    return Err(GeoError::Input("first step must not carry a reading".into()))
                }
                (t, None) if t > 0 => {
                    return Err(GeoError::Input(format!("step {t} is missing its reading")))
                }
                (_, Some(r)) if !(r.dx.is_finite() && r.dy.is_finite() && r.dtheta.is_finite()) => {
                    return Err(GeoError::Input(format!("step {t} has a non-finite reading")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ZeroDiagonal,
    AntiSymmetry,
    Additivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub states: Vec<usize>,
    pub component: Component,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).fold(0.0, f64::max)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "consistent");
        }
        writeln!(f, "{:<14} {:<12} {:<6} {:>14}", "kind", "states", "comp", "magnitude")?;
        for v in &self.violations {
            let states: Vec<String> = v.states.iter().map(|s| s.to_string()).collect();
            writeln!(
                f,
                "{:<14} {:<12} {:<6} {:>14.6e}",
                format!("{:?}", v.kind),
                states.join(","),
                format!("{:?}", v.component).to_lowercase(),
                v.magnitude
            )?;
        }
        Ok(())
    }
}

fn push_planar(
    out: &mut Vec<Violation>,
    kind: ViolationKind,
    states: &[usize],
    residual: (f64, f64),
    tol: f64,
) {
    for (comp, r) in [(Component::X, residual.0), (Component::Y, residual.1)] {
        if r.abs() > tol || r.is_nan() {
            out.push(Violation { kind, states: states.to_vec(), component: comp, magnitude: r.abs() });
        }
    }
}

fn push_angle(out: &mut Vec<Violation>, kind: ViolationKind, states: &[usize], residual: f64, tol: f64) {
    let r = wrap_angle(residual).abs();
    if r > tol || r.is_nan() {
        out.push(Violation { kind, states: states.to_vec(), component: Component::Theta, magnitude: r });
    }
}

/// Lists every constraint of `level` violated by more than `tol`.
pub fn check_consistency(model: &GeoHmm, level: ConstraintLevel, tol: f64) -> ConsistencyReport {
    check_means(&model.relation_means(), model.mode, level, tol)
}

/// [`check_consistency`] on a bare table of relation means.
pub fn check_means(
    mu: &[Vec<(f64, f64, f64)>],
    mode: CoordinateMode,
    level: ConstraintLevel,
    tol: f64,
) -> ConsistencyReport {
    let mut v = Vec::new();
    if level == ConstraintLevel::Unconstrained {
        return ConsistencyReport { violations: v };
    }
    let n = mu.len();
    for a in 0..n {
        let d = mu[a][a];
        push_planar(&mut v, ViolationKind::ZeroDiagonal, &[a], (d.0, d.1), tol);
        push_angle(&mut v, ViolationKind::ZeroDiagonal, &[a], d.2, tol);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (ab, ba) = (mu[a][b], mu[b][a]);
            let back = match mode {
                CoordinateMode::Global => (ba.0, ba.1),
                CoordinateMode::Relative => transform_point(ab.2, (ba.0, ba.1)),
            };
            push_planar(&mut v, ViolationKind::AntiSymmetry, &[a, b], (ab.0 + back.0, ab.1 + back.1), tol);
            push_angle(&mut v, ViolationKind::AntiSymmetry, &[a, b], ab.2 + ba.2, tol);
        }
    }
    if level == ConstraintLevel::Additive {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let (ab, bc, ac) = (mu[a][b], mu[b][c], mu[a][c]);
                    let bc_in_a = match mode {
                        CoordinateMode::Global => (bc.0, bc.1),
                        CoordinateMode::Relative => transform_point(ab.2, (bc.0, bc.1)),
                    };
                    push_planar(
                        &mut v,
                        ViolationKind::Additivity,
                        &[a, b, c],
                        (ac.0 - ab.0 - bc_in_a.0, ac.1 - ab.1 - bc_in_a.1),
                        tol,
                    );
                    push_angle(&mut v, ViolationKind::Additivity, &[a, b, c], angle_diff(ac.2, ab.2 + bc.2), tol);
                }
            }
        }
    }
    ConsistencyReport { violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn transform_cases() {
        assert_eq!(transform_point(0.0, (3.0, 4.0)), (3.0, 4.0));
        let (x, y) = transform_point(PI / 2.0, (1.0, 0.0));
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn transforms_compose_as_rotations() {
        let p = (1.7, -0.4);
        let (a, b) = (0.3, 2.1);
        let lhs = transform_point(b, transform_point(a, p));
        let rhs = transform_point(a + b, p);
        assert!((lhs.0 - rhs.0).abs() < 1e-14 && (lhs.1 - rhs.1).abs() < 1e-14);
    }

    #[test]
    fn density_at_mean() {
        let e = RelationEntry::new((1.0, -2.0, 0.5), 1.0, 1.0, 0.0);
        let r = Reading::new(1.0, -2.0, 0.5);
        let want = 1.0 / TAU * (1.0 / TAU);
        assert!((relation_density(&r, &e) - want).abs() < 1e-15);
        assert!((relation_density(&r, &e) - 0.025330).abs() < 1e-6);
        let wrapped = Reading::new(1.0, -2.0, 0.5 + TAU);
        assert!((relation_density(&wrapped, &e) - want).abs() < 1e-15);
        let e = RelationEntry::new((1.0, -2.0, 0.5), 2.0, 0.5, 3.0);
        let lo = relation_density(&Reading::new(0.2, -1.0, 0.0), &e);
        let hi = relation_density(&Reading::new(1.8, -1.0, 0.0), &e);
        assert!((lo - hi).abs() < 1e-15 && lo >= 0.0);
    }

    #[test]
    fn density_integrates_to_one() {
        let entries = [
            RelationEntry::new((0.5, -1.0, 1.0), 0.8, 2.0, 3.0),
            RelationEntry::new((10.0, 4.0, -2.5), 4.0, 0.3, 0.2),
        ];
        for e in &entries {
            let grid = |mu: f64, var: f64| -> f64 {
                let sd = var.sqrt();
                let n = 4000;
                let h = 20.0 * sd / n as f64;
                (0..=n)
                    .map(|k| {
                        let x = mu - 10.0 * sd + k as f64 * h;
                        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                        w * normal_log_density(x, mu, var).exp()
                    })
                    .sum::<f64>()
                    * h
            };
            let n = 4000;
            let h = TAU / n as f64;
            let theta: f64 = (0..n)
                .map(|k| vm_log_density(-PI + (k as f64 + 0.5) * h, e.mu_theta, e.kappa).exp())
                .sum::<f64>()
                * h;
            let total = grid(e.mu_x, e.var_x) * grid(e.mu_y, e.var_y) * theta;
            assert!((total - 1.0).abs() < 1e-5, "{total}");
        }
    }

    #[test]
    fn embed_cases() {
        let zero = embed_relations(&[0.0; 3], &[0.0; 3], &[0.0; 3], CoordinateMode::Global);
        assert!(zero.iter().flatten().all(|m| *m == (0.0, 0.0, 0.0)));
        let mu = embed_relations(&[0.0, 5.0, 7.0], &[0.0; 3], &[0.0; 3], CoordinateMode::Global);
        assert_eq!(mu[0][2].0, 7.0);
        assert_eq!(mu[2][1].0, -2.0);
        assert_eq!(mu[1][1].0, 0.0);
    }

    fn model_from_means(mu: &[Vec<(f64, f64, f64)>], mode: CoordinateMode) -> GeoHmm {
        let n = mu.len();
        let mut m = GeoHmm::uniform(n, &[2], mode, 1.0);
        for i in 0..n {
            for j in 0..n {
                m.relations[i][j].set_mean(mu[i][j]);
            }
        }
        m
    }

    #[test]
    fn embedded_models_are_consistent() {
        let x = [0.0, 3.0, -1.5, 7.25];
        let y = [1.0, -2.0, 4.0, 0.5];
        let th = [0.0, 1.2, -2.7, 3.0];
        for mode in [CoordinateMode::Global, CoordinateMode::Relative] {
            let m = model_from_means(&embed_relations(&x, &y, &th, mode), mode);
            let rep = check_consistency(&m, ConstraintLevel::Additive, 1e-9);
            assert!(rep.is_consistent(), "{mode:?}: {rep}");
        }
    }

    #[test]
    fn reports_antisymmetry_violation() {
        let mut mu = embed_relations(&[0.0, 5.0], &[0.0; 2], &[0.0; 2], CoordinateMode::Global);
        mu[1][0].0 = -4.0;
        let m = model_from_means(&mu, CoordinateMode::Global);
        let rep = check_consistency(&m, ConstraintLevel::AntiSymmetric, 1e-9);
        assert_eq!(rep.violations.len(), 1);
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::AntiSymmetry);
        assert_eq!(v.component, Component::X);
        assert!((v.magnitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_additivity_violation() {
        let mut mu = vec![vec![(0.0, 0.0, 0.0); 3]; 3];
        let mut set = |i: usize, j: usize, x: f64| {
            mu[i][j].0 = x;
            mu[j][i].0 = -x;
        };
        set(0, 1, 1.0);
        set(1, 2, 1.0);
        set(0, 2, 3.0);
        let m = model_from_means(&mu, CoordinateMode::Global);
        assert!(check_consistency(&m, ConstraintLevel::AntiSymmetric, 1e-9).is_consistent());
        let rep = check_consistency(&m, ConstraintLevel::Additive, 1e-9);
        let v = rep
            .violations
            .iter()
            .find(|v| v.states == vec![0, 1, 2])
            .expect("0->1->2 violation reported");
        assert!((v.magnitude - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angle_checks_are_modular() {
        let mut mu = vec![vec![(0.0, 0.0, 0.0); 2]; 2];
        mu[0][1].2 = PI;
        mu[1][0].2 = PI;
        let m = model_from_means(&mu, CoordinateMode::Global);
        assert!(check_consistency(&m, ConstraintLevel::Additive, 1e-9).is_consistent());
    }

    #[test]
    fn uniform_model_validates() {
        let m = GeoHmm::uniform(3, &[2, 4], CoordinateMode::Global, 1.0);
        m.validate().unwrap();
        let mut bad = m.clone();
        bad.transitions[1][0] += 0.1;
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn additive_implies_antisymmetric(
            coords in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0, -PI..PI), 2..6),
            relative in proptest::bool::ANY,
        ) {
            let mode = if relative { CoordinateMode::Relative } else { CoordinateMode::Global };
            let x: Vec<f64> = coords.iter().map(|c| c.0).collect();
            let y: Vec<f64> = coords.iter().map(|c| c.1).collect();
            let t: Vec<f64> = coords.iter().map(|c| c.2).collect();
            let m = model_from_means(&embed_relations(&x, &y, &t, mode), mode);
            let add = check_consistency(&m, ConstraintLevel::Additive, 1e-9);
            proptest::prop_assert!(add.is_consistent());
            proptest::prop_assert!(check_consistency(&m, ConstraintLevel::AntiSymmetric, 1e-9).is_consistent());
        }
    }
}
