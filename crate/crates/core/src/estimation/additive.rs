//! Additive relation updates.
//!
//! Planar means are reparameterized as differences of per-state positions
//! and fitted by weighted least squares. Headings cannot be treated the same
//! way under the von Mises likelihood, so the anti-symmetric heading
//! estimates are projected onto the additive space while well-supported
//! entries are held fixed.

use nalgebra::{DMatrix, DVector};

use super::relations::{antisym_heading, pair_stats, update_diagonal, PairStats, RelationGuards};
use crate::circstats::{resultant_to_kappa, wrap_angle};
use crate::error::{GeoError, Result};
use crate::inference::Posteriors;
use crate::model::{embed_relations, transform_point, CoordinateMode, ExperienceSequence, RelationEntry};

/// A weighted difference constraint `x_to - x_from ≈ value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub value: f64,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, value: f64, weight: f64) -> Self {
        Self { from, to, value, weight }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Weighted least-squares embedding: minimizes `Σ w (value - (x_to - x_from))²`.
///
/// Each connected component of the edge graph is solved on its own with one
/// node pinned at 0: `anchor` for its component, the lowest index otherwise.
/// Nodes without edges sit at 0.
pub fn solve_positions(edges: &[Edge], n: usize, anchor: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(GeoError::Input("cannot embed zero states".into()));
    }
    if anchor >= n {
        return Err(GeoError::Input(format!("anchor {anchor} out of range")));
    }
    let mut dsu = DisjointSet::new(n);
    for e in edges {
        if e.from >= n || e.to >= n {
            return Err(GeoError::Input(format!("edge ({}, {}) out of range", e.from, e.to)));
        }
        if !(e.weight >= 0.0) || !e.value.is_finite() {
            return Err(GeoError::Input("edge weights must be nonnegative and values finite".into()));
        }
        if e.weight > 0.0 && e.from != e.to {
            dsu.union(e.from, e.to);
        }
    }
    let mut x = vec![0.0; n];
    let roots: Vec<usize> = (0..n).map(|v| dsu.find(v)).collect();
    let mut seen = vec![false; n];
    for v in 0..n {
        let root = roots[v];
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let members: Vec<usize> = (0..n).filter(|&u| roots[u] == root).collect();
        if members.len() < 2 {
            continue;
        }
        let pin = if roots[anchor] == root { anchor } else { members[0] };
        let free: Vec<usize> = members.iter().copied().filter(|&u| u != pin).collect();
        let mut index = vec![usize::MAX; n];
        for (k, &u) in free.iter().enumerate() {
            index[u] = k;
        }
        let m = free.len();
        let mut lap = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for e in edges {
            if e.weight <= 0.0 || e.from == e.to || roots[e.from] != root {
                continue;
            }
            let (i, j) = (index[e.from], index[e.to]);
            if i != usize::MAX {
                lap[(i, i)] += e.weight;
                rhs[i] -= e.weight * e.value;
            }
            if j != usize::MAX {
                lap[(j, j)] += e.weight;
                rhs[j] += e.weight * e.value;
            }
            if i != usize::MAX && j != usize::MAX {
                lap[(i, j)] -= e.weight;
                lap[(j, i)] -= e.weight;
            }
        }
        let sol = match lap.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => lap
                .lu()
                .solve(&rhs)
                .ok_or_else(|| GeoError::Degenerate("singular position system".into()))?,
        };
        for (k, &u) in free.iter().enumerate() {
            x[u] = sol[k];
        }
    }
    Ok(x)
}

/// Result of projecting heading estimates onto the additive space.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadingProjection {
    /// Per-state headings with `theta[0] = 0`.
    pub theta: Vec<f64>,
    /// `wrap(theta[j] - theta[i])`.
    pub mu_theta: Vec<Vec<f64>>,
    /// Unordered pairs reproduced exactly (`i < j`).
    pub held: Vec<(usize, usize)>,
}

const HELD_CONSISTENCY_TOL: f64 = 1e-9;

/// Projects anti-symmetric heading estimates onto additive headings.
pub fn project_headings(raw: &[Vec<f64>], weights: &[Vec<f64>], tau: f64) -> HeadingProjection {
    project_headings_from(raw, weights, tau, None)
}

/// [`project_headings`] with a reference embedding used to pick the branch
/// of each raw angle before the least-squares fit.
pub fn project_headings_from(
    raw: &[Vec<f64>],
    weights: &[Vec<f64>],
    tau: f64,
    reference: Option<&[f64]>,
) -> HeadingProjection {
    let n = raw.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (wf, wb) = (weights[i][j].max(0.0), weights[j][i].max(0.0));
            let w = wf + wb;
            if !(w > 0.0) {
                continue;
            }
            let (fwd, bwd) = (raw[i][j], -raw[j][i]);
            let value = wrap_angle((wf * fwd.sin() + wb * bwd.sin()).atan2(wf * fwd.cos() + wb * bwd.cos()));
            edges.push(Edge::new(i, j, value, w));
        }
    }
    // strongest first; ties by index for determinism
    edges.sort_by(|a, b| b.weight.total_cmp(&a.weight).then((a.from, a.to).cmp(&(b.from, b.to))));

    // held spanning forest, with `local` headings relative to each tree root
    let mut comp: Vec<usize> = (0..n).collect();
    let mut local = vec![0.0; n];
    let mut held = Vec::new();
    let mut soft = Vec::new();
    for e in &edges {
        if e.weight < tau {
            soft.push(*e);
            continue;
        }
        let (ci, cj) = (comp[e.from], comp[e.to]);
        if ci == cj {
            let residual = wrap_angle(e.value - (local[e.to] - local[e.from]));
            if residual.abs() <= HELD_CONSISTENCY_TOL {
                held.push((e.from, e.to));
            } else {
                soft.push(*e);
            }
            continue;
        }
        let shift = local[e.from] + e.value - local[e.to];
        for v in 0..n {
            if comp[v] == cj {
                comp[v] = ci;
                local[v] += shift;
            }
        }
        held.push((e.from, e.to));
    }

    let mut comp_ids: Vec<usize> = comp.clone();
    comp_ids.sort_unstable();
    comp_ids.dedup();
    let comp_index = |c: usize| comp_ids.binary_search(&c).unwrap();
    let anchor = comp_index(comp[0]);

    let mut theta: Vec<f64> = match reference {
        Some(r) if r.len() == n => r.to_vec(),
        _ => {
            // greedy spanning tree over the soft edges on top of the held forest
            let mut offs = vec![0.0; comp_ids.len()];
            let mut group: Vec<usize> = (0..comp_ids.len()).collect();
            for e in &soft {
                let (a, b) = (comp_index(comp[e.from]), comp_index(comp[e.to]));
                let (ga, gb) = (group[a], group[b]);
                if ga == gb {
                    continue;
                }
                let shift = offs[a] + local[e.from] + e.value - local[e.to] - offs[b];
                for k in 0..group.len() {
                    if group[k] == gb {
                        group[k] = ga;
                        offs[k] += shift;
                    }
                }
            }
            (0..n).map(|v| local[v] + offs[comp_index(comp[v])]).collect()
        }
    };

    for _ in 0..8 {
        let cross: Vec<Edge> = soft
            .iter()
            .filter(|e| comp[e.from] != comp[e.to])
            .map(|e| {
                let predicted = theta[e.to] - theta[e.from];
                let unwrapped = predicted + wrap_angle(e.value - predicted);
                Edge::new(
                    comp_index(comp[e.from]),
                    comp_index(comp[e.to]),
                    unwrapped - local[e.to] + local[e.from],
                    e.weight,
                )
            })
            .collect();
        let offsets = solve_positions(&cross, comp_ids.len(), anchor).expect("component graph is well formed");
        let next: Vec<f64> = (0..n).map(|v| local[v] + offsets[comp_index(comp[v])]).collect();
        let moved = next
            .iter()
            .zip(&theta)
            .any(|(a, b)| wrap_angle((a - next[0]) - (b - theta[0])).abs() > 1e-12);
        theta = next;
        if !moved {
            break;
        }
    }
    let origin = theta[0];
    let theta: Vec<f64> = theta.iter().map(|t| wrap_angle(t - origin)).collect();
    let mu_theta = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { wrap_angle(theta[j] - theta[i]) }).collect())
        .collect();
    HeadingProjection { theta, mu_theta, held }
}

/// Headings of an additive relation matrix, read off its first row.
pub fn headings_of(relations: &[Vec<RelationEntry>]) -> Vec<f64> {
    relations[0].iter().map(|e| e.mu_theta).collect()
}

/// Relation part of the expected complete-data log-likelihood (additive
/// constants dropped) for off-diagonal `means`, with spreads taken from
/// `spreads`.
fn relation_objective(stats: &[Vec<PairStats>], spreads: &[Vec<RelationEntry>], means: &[Vec<(f64, f64, f64)>]) -> f64 {
    let n = stats.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            let st = &stats[i][j];
            if i == j || st.weight <= 0.0 {
                continue;
            }
            let sp = &spreads[i][j];
            let (mx, my, mt) = means[i][j];
            let (vx, vy) = st.variance_about((mx, my));
            let (s, c) = mt.sin_cos();
            q += sp.kappa * (c * st.sum_cos + s * st.sum_sin) - 0.5 * st.weight * (vx / sp.var_x + vy / sp.var_y);
        }
    }
    q
}

const ASCENT_SWEEPS: usize = 50;

/// Coordinate ascent on the heading terms over additive headings, one
/// state at a time (each update is closed form). State 0 stays fixed.
fn heading_ascent(stats: &[Vec<PairStats>], spreads: &[Vec<RelationEntry>], start: &[f64]) -> Vec<f64> {
    let n = start.len();
    let mut theta = start.to_vec();
    for _ in 0..ASCENT_SWEEPS {
        let mut moved: f64 = 0.0;
        for k in 1..n {
            // coefficient w with objective Re(w e^{iθ_k}) + const
            let (mut wr, mut wi) = (0.0, 0.0);
            for m in 0..n {
                if m == k {
                    continue;
                }
                let (into, out) = (&stats[m][k], &stats[k][m]);
                let (si, ci) = theta[m].sin_cos();
                // readings m→k: κ conj(Z) e^{-iθ_m}
                let (kr, kc, ks) = (spreads[m][k].kappa, into.sum_cos, into.sum_sin);
                wr += kr * (kc * ci - ks * si);
                wi += kr * (-kc * si - ks * ci);
                // readings k→m: κ Z e^{-iθ_m}
                let (kr, kc, ks) = (spreads[k][m].kappa, out.sum_cos, out.sum_sin);
                wr += kr * (kc * ci + ks * si);
                wi += kr * (ks * ci - kc * si);
            }
            if wr == 0.0 && wi == 0.0 {
                continue;
            }
            let next = wrap_angle(-wi.atan2(wr));
            moved = moved.max(crate::circstats::angle_diff(next, theta[k]).abs());
            theta[k] = next;
        }
        if moved < 1e-12 {
            break;
        }
    }
    theta
}

/// Additive update: anti-symmetric heading estimates projected onto the
/// additive space, positions by weighted least squares, then spreads
/// against the new means.
///
/// When the previous matrix is additive (`reference` holds its headings)
/// the projected means compete with the previous means and with a heading
/// ascent started from the previous headings; the candidate with the
/// highest expected log-likelihood is kept, so the step never lowers it.
pub fn update_relations_additive(
    post: &Posteriors,
    e: &ExperienceSequence,
    previous: &[Vec<RelationEntry>],
    mode: CoordinateMode,
    guards: &RelationGuards,
    tau: f64,
    reference: Option<&[f64]>,
) -> Vec<Vec<RelationEntry>> {
    let n = previous.len();
    let stats = pair_stats(post, e, previous);

    let mut raw = vec![vec![0.0; n]; n];
    let mut weights = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (fwd, bwd) = (&stats[i][j], &stats[j][i]);
            if fwd.weight + bwd.weight < guards.min_weight {
                continue;
            }
            let (pij, pji) = (&previous[i][j], &previous[j][i]);
            let th = antisym_heading(fwd, bwd, pij.kappa, pji.kappa, pij.mu_theta);
            raw[i][j] = th;
            raw[j][i] = -th;
            weights[i][j] = fwd.weight;
            weights[j][i] = bwd.weight;
        }
    }
    let heading = project_headings_from(&raw, &weights, tau, reference);

    let embed_at = |theta: &[f64]| {
        let mut ex = Vec::new();
        let mut ey = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let st: &PairStats = &stats[i][j];
                if i == j || st.weight < guards.min_weight {
                    continue;
                }
                let old = &previous[i][j];
                let (sx, sy) = st.raw_sum();
                let (mean, vx, vy) = match mode {
                    CoordinateMode::Global => ((sx / st.weight, sy / st.weight), old.var_x, old.var_y),
                    CoordinateMode::Relative => {
                        let g = transform_point(theta[i], (sx / st.weight, sy / st.weight));
                        let (s, c) = theta[i].sin_cos();
                        let vx = c * c * old.var_x + s * s * old.var_y;
                        let vy = s * s * old.var_x + c * c * old.var_y;
                        (g, vx, vy)
                    }
                };
                ex.push(Edge::new(i, j, mean.0, st.weight / vx));
                ey.push(Edge::new(i, j, mean.1, st.weight / vy));
            }
        }
        let xs = solve_positions(&ex, n, 0).expect("edges are well formed");
        let ys = solve_positions(&ey, n, 0).expect("edges are well formed");
        embed_relations(&xs, &ys, theta, mode)
    };

    let mut means = embed_at(&heading.theta);
    if let Some(old_theta) = reference {
        let mut best = relation_objective(&stats, previous, &means);
        let ascended = embed_at(&heading_ascent(&stats, previous, old_theta));
        let kept: Vec<Vec<(f64, f64, f64)>> = previous.iter().map(|row| row.iter().map(|e| e.mean()).collect()).collect();
        for candidate in [ascended, kept] {
            let q = relation_objective(&stats, previous, &candidate);
            if q > best {
                best = q;
                means = candidate;
            }
        }
    }

    let mut out = previous.to_vec();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let entry = &mut out[i][j];
            entry.set_mean(means[i][j]);
            let st = &stats[i][j];
            if st.weight < guards.min_weight {
                continue;
            }
            let (vx, vy) = st.variance_about((entry.mu_x, entry.mu_y));
            entry.var_x = vx.max(guards.var_floor);
            entry.var_y = vy.max(guards.var_floor);
            entry.kappa = resultant_to_kappa(st.resultant_about(entry.mu_theta).max(0.0)).min(guards.kappa_max);
        }
    }
    update_diagonal(&mut out, &stats, guards);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_edge() {
        let x = solve_positions(&[Edge::new(0, 1, 5.0, 2.0)], 2, 0).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_triangle() {
        let edges = [Edge::new(0, 1, 1.0, 1.0), Edge::new(1, 2, 1.0, 1.0), Edge::new(0, 2, 3.0, 1.0)];
        let x = solve_positions(&edges, 3, 0).unwrap();
        assert!(x[0] == 0.0);
        assert!((x[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!((x[2] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance_and_exact_chain() {
        let base = [Edge::new(0, 1, 2.0, 1.0), Edge::new(1, 2, -1.0, 3.0), Edge::new(2, 3, 0.5, 0.2), Edge::new(0, 3, 1.5, 1.0)];
        let x1 = solve_positions(&base, 4, 0).unwrap();
        assert!((x1[3] - 1.5).abs() < 1e-12 && (x1[2] - 1.0).abs() < 1e-12);
        let scaled: Vec<Edge> = base.iter().map(|e| Edge { weight: e.weight * 37.0, ..*e }).collect();
        let x2 = solve_positions(&scaled, 4, 0).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn components_anchor_separately() {
        let edges = [Edge::new(0, 1, 1.0, 1.0), Edge::new(3, 2, 4.0, 1.0)];
        let x = solve_positions(&edges, 5, 1).unwrap();
        assert_eq!(x[1], 0.0);
        assert!((x[0] + 1.0).abs() < 1e-12);
        assert_eq!(x[2], 0.0);
        assert!((x[3] + 4.0).abs() < 1e-12);
        assert_eq!(x[4], 0.0);
        assert!(solve_positions(&[], 0, 0).is_err());
    }

    fn full(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect()
    }

    #[test]
    fn additive_input_is_fixed_point() {
        let th = [0.0, 1.0, -2.5, 3.0];
        let raw = full(4, |i, j| wrap_angle(th[j] - th[i]));
        for tau in [0.5, 100.0] {
            let p = project_headings(&raw, &full(4, |i, j| (i + j) as f64 + 1.0), tau);
            for i in 0..4 {
                for j in 0..4 {
                    assert!(wrap_angle(p.mu_theta[i][j] - raw[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn held_chain_overrides_weak_entry() {
        let mut raw = full(3, |_, _| 0.0);
        let mut w = full(3, |_, _| 0.0);
        let mut set = |i: usize, j: usize, v: f64, wt: f64| {
            raw[i][j] = v;
            raw[j][i] = -v;
            w[i][j] = wt;
        };
        set(0, 1, PI / 2.0, 50.0);
        set(1, 2, PI / 2.0, 50.0);
        set(0, 2, 170f64.to_radians(), 0.1);
        let p = project_headings(&raw, &w, 1.0);
        assert!(p.theta[0].abs() < 1e-12);
        assert!((p.theta[1] - PI / 2.0).abs() < 1e-12);
        assert!(wrap_angle(p.theta[2] - PI).abs() < 1e-12);
        assert!(wrap_angle(p.mu_theta[0][2] - PI).abs() < 1e-12);
    }

    #[test]
    fn conflicting_held_cycle_demotes_weakest() {
        let mut raw = full(3, |_, _| 0.0);
        let mut w = full(3, |_, _| 0.0);
        let mut set = |i: usize, j: usize, v: f64, wt: f64| {
            raw[i][j] = v;
            raw[j][i] = -v;
            w[i][j] = wt;
        };
        set(0, 1, 0.5, 30.0);
        set(1, 2, 0.25, 20.0);
        set(0, 2, 1.0, 10.0);
        let p = project_headings(&raw, &w, 1.0);
        assert_eq!(p.held, vec![(0, 1), (1, 2)]);
        assert!((p.mu_theta[0][1] - 0.5).abs() < 1e-12);
        assert!((p.mu_theta[1][2] - 0.25).abs() < 1e-12);
        assert!((p.mu_theta[0][2] - 0.75).abs() < 1e-12);
    }
    use crate::estimation::relations::update_relations_antisym;
    use crate::model::{check_means, ConstraintLevel, Reading, Step};

    /// One step per `(from, to, reading, weight)`.
    fn data(n: usize, moves: &[(usize, usize, Reading, f64)]) -> (ExperienceSequence, Posteriors) {
        let mut steps = vec![Step { obs: vec![0], reading: None }];
        let mut xi = Vec::new();
        for &(i, j, r, w) in moves {
            steps.push(Step { obs: vec![0], reading: Some(r) });
            let mut slab = vec![vec![0.0; n]; n];
            slab[i][j] = w;
            xi.push(slab);
        }
        let gamma = vec![vec![1.0 / n as f64; n]; steps.len()];
        (ExperienceSequence::new(steps).unwrap(), Posteriors { gamma, xi })
    }

    fn start(n: usize) -> Vec<Vec<RelationEntry>> {
        vec![vec![RelationEntry::new((0.0, 0.0, 0.0), 1.0, 1.0, 1.0); n]; n]
    }

    #[test]
    fn noise_free_embedding_is_recovered() {
        let (x, y, th) = ([0.0, 3.0, 1.0, -2.0], [0.0, 1.0, 4.0, 2.5], [0.0, 0.7, 2.9, -1.4]);
        for mode in [CoordinateMode::Global, CoordinateMode::Relative] {
            let mu = embed_relations(&x, &y, &th, mode);
            let mut moves = Vec::new();
            for (i, j) in [(0, 1), (1, 2), (2, 3), (3, 0), (2, 0), (1, 3)] {
                let (a, b, c) = mu[i][j];
                moves.push((i, j, Reading::new(a, b, c), 2.0));
            }
            let (e, post) = data(4, &moves);
            let r = update_relations_additive(&post, &e, &start(4), mode, &RelationGuards::default(), 1.0, None);
            for i in 0..4 {
                for j in 0..4 {
                    let (a, b, c) = r[i][j].mean();
                    assert!((a - mu[i][j].0).abs() < 1e-9 && (b - mu[i][j].1).abs() < 1e-9, "{mode:?} {i}{j}");
                    assert!(wrap_angle(c - mu[i][j].2).abs() < 1e-9);
                }
            }
            let means: Vec<Vec<_>> = r.iter().map(|row| row.iter().map(|x| x.mean()).collect()).collect();
            assert!(check_means(&means, mode, ConstraintLevel::Additive, 1e-9).is_consistent());
        }
    }

    #[test]
    fn two_states_match_antisymmetric() {
        let moves = [
            (0, 1, Reading::new(1.0, 2.0, 0.3), 1.0),
            (1, 0, Reading::new(-1.2, -1.7, -0.25), 1.0),
            (0, 1, Reading::new(0.8, 2.2, 0.35), 0.5),
            (1, 1, Reading::new(0.1, 0.0, 0.05), 1.0),
        ];
        let (e, post) = data(2, &moves);
        let g = RelationGuards::default();
        let add = update_relations_additive(&post, &e, &start(2), CoordinateMode::Global, &g, 1.0, None);
        let anti = update_relations_antisym(&post, &e, &start(2), CoordinateMode::Global, &g);
        for i in 0..2 {
            for j in 0..2 {
                let (p, q) = (add[i][j], anti[i][j]);
                for (u, v) in [(p.mu_x, q.mu_x), (p.mu_y, q.mu_y), (p.mu_theta, q.mu_theta), (p.var_x, q.var_x), (p.var_y, q.var_y), (p.kappa, q.kappa)] {
                    assert!((u - v).abs() < 1e-12, "{i}{j}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn weak_corrupted_relation_follows_strong_legs() {
        let legs = [(0, 1, Reading::new(0.0, 10.0, 0.0)), (1, 2, Reading::new(-5.0, 0.0, 0.0))];
        let mut moves: Vec<_> = legs.iter().flat_map(|&(i, j, r)| std::iter::repeat((i, j, r, 1.0)).take(20)).collect();
        moves.push((0, 2, Reading::new(40.0, -30.0, 0.0), 1e-6));
        moves.push((2, 3, Reading::new(0.0, -10.0, 0.0), 1.0));
        let (e, post) = data(4, &moves);
        let r = update_relations_additive(&post, &e, &start(4), CoordinateMode::Global, &RelationGuards::default(), 1.0, None);
        let (x, y, _) = r[0][2].mean();
        assert!((x + 5.0).abs() < 1e-3 && (y - 10.0).abs() < 1e-3, "({x}, {y})");
    }

    #[test]
    fn soft_headings_are_least_squares_optimal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = 4;
            let raw = {
                let mut m = full(n, |_, _| 0.0);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let v: f64 = rng.random_range(-0.5..0.5) + (j as f64 - i as f64) * 0.4;
                        m[i][j] = v;
                        m[j][i] = -v;
                    }
                }
                m
            };
            let w = full(n, |i, j| if i < j { rng.random_range(0.01..0.9) } else { 0.0 });
            let p = project_headings(&raw, &w, 1.0);
            let cost = |th: &[f64]| {
                let mut c = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        c += w[i][j] * wrap_angle(raw[i][j] - (th[j] - th[i])).powi(2);
                    }
                }
                c
            };
            let best = cost(&p.theta);
            for _ in 0..200 {
                let cand: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { p.theta[k] + rng.random_range(-0.3..0.3) }).collect();
                assert!(cost(&cand) >= best - 1e-12);
            }
        }
    }
}
