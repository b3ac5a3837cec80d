//! Relation-matrix updates with the lag-behind rule.
//!
//! Means are re-estimated with the previous iteration's variances and
//! concentrations, then the spreads are re-estimated around the new means.
//! Each half-step maximizes the expected complete-data log-likelihood over
//! its own parameters, so the combined step never decreases it.

use crate::circstats::{resultant_to_kappa, wrap_angle};
use crate::inference::Posteriors;
use crate::model::{transform_point, CoordinateMode, ExperienceSequence, RelationEntry};

/// Numerical guards shared by all relation updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationGuards {
    pub var_floor: f64,
    pub kappa_max: f64,
    /// Pairs whose expected transition count is below this keep their
    /// previous parameters.
    pub min_weight: f64,
}

impl Default for RelationGuards {
    fn default() -> Self {
        Self { var_floor: crate::model::VAR_FLOOR, kappa_max: crate::circstats::KAPPA_MAX, min_weight: 1e-9 }
    }
}

/// ξ-weighted sufficient statistics of the readings attributed to one
/// ordered pair. Planar sums are taken about `center` (the previous mean)
/// to keep the second moments well conditioned.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairStats {
    pub weight: f64,
    pub center: (f64, f64),
    pub sum_x: f64,
    pub sum_y: f64,
    pub sum_xx: f64,
    pub sum_yy: f64,
    pub sum_sin: f64,
    pub sum_cos: f64,
}

impl PairStats {
    /// `Σ w r` in absolute coordinates.
    pub fn raw_sum(&self) -> (f64, f64) {
        (self.sum_x + self.weight * self.center.0, self.sum_y + self.weight * self.center.1)
    }

    pub fn mean(&self) -> (f64, f64) {
        let (sx, sy) = self.raw_sum();
        (sx / self.weight, sy / self.weight)
    }

    /// Weighted mean squared deviation about `mu`.
    pub fn variance_about(&self, mu: (f64, f64)) -> (f64, f64) {
        let dx = mu.0 - self.center.0;
        let dy = mu.1 - self.center.1;
        let vx = (self.sum_xx - 2.0 * dx * self.sum_x + dx * dx * self.weight) / self.weight;
        let vy = (self.sum_yy - 2.0 * dy * self.sum_y + dy * dy * self.weight) / self.weight;
        (vx.max(0.0), vy.max(0.0))
    }

    /// Mean cosine of the heading readings about `mu`.
    pub fn resultant_about(&self, mu: f64) -> f64 {
        (mu.cos() * self.sum_cos + mu.sin() * self.sum_sin) / self.weight
    }
}

/// Accumulates [`PairStats`] for every ordered pair. `xi[t]` is paired with
/// the reading that arrives at step `t + 1`.
pub fn pair_stats(post: &Posteriors, e: &ExperienceSequence, previous: &[Vec<RelationEntry>]) -> Vec<Vec<PairStats>> {
    let n = post.n_states();
    let mut stats: Vec<Vec<PairStats>> = previous
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| PairStats { center: (p.mu_x, p.mu_y), ..Default::default() })
                .collect()
        })
        .collect();
    for (t, slab) in post.xi.iter().enumerate() {
        let r = e.reading(t + 1);
        let (s, c) = r.dtheta.sin_cos();
        for i in 0..n {
            for j in 0..n {
                let w = slab[i][j];
                if w == 0.0 {
                    continue;
                }
                let st = &mut stats[i][j];
                let dx = r.dx - st.center.0;
                let dy = r.dy - st.center.1;
                st.weight += w;
                st.sum_x += w * dx;
                st.sum_y += w * dy;
                st.sum_xx += w * dx * dx;
                st.sum_yy += w * dy * dy;
                st.sum_sin += w * s;
                st.sum_cos += w * c;
            }
        }
    }
    stats
}

fn spread_update(entry: &mut RelationEntry, st: &PairStats, guards: &RelationGuards) {
    if st.weight < guards.min_weight {
        return;
    }
    let (vx, vy) = st.variance_about((entry.mu_x, entry.mu_y));
    entry.var_x = vx.max(guards.var_floor);
    entry.var_y = vy.max(guards.var_floor);
    let r = st.resultant_about(entry.mu_theta).max(0.0);
    entry.kappa = resultant_to_kappa(r).min(guards.kappa_max);
}

/// Lag-behind heading mean for the pair `(i, j)` using both directions.
pub(crate) fn antisym_heading(fwd: &PairStats, bwd: &PairStats, k_fwd: f64, k_bwd: f64, old: f64) -> f64 {
    let (mut kf, mut kb) = (k_fwd, k_bwd);
    if kf * fwd.weight + kb * bwd.weight <= 0.0 {
        kf = 1.0;
        kb = 1.0;
    }
    let num = fwd.sum_sin * kf - bwd.sum_sin * kb;
    let den = fwd.sum_cos * kf + bwd.sum_cos * kb;
    if num == 0.0 && den == 0.0 {
        old
    } else {
        wrap_angle(num.atan2(den))
    }
}

/// Each ordered pair (diagonal included) estimated on its own data.
pub fn update_relations_unconstrained(
    post: &Posteriors,
    e: &ExperienceSequence,
    previous: &[Vec<RelationEntry>],
    guards: &RelationGuards,
) -> Vec<Vec<RelationEntry>> {
    let stats = pair_stats(post, e, previous);
    let mut out = previous.to_vec();
    for (row, srow) in out.iter_mut().zip(&stats) {
        for (entry, st) in row.iter_mut().zip(srow) {
            if st.weight < guards.min_weight {
                continue;
            }
            let (mx, my) = st.mean();
            entry.mu_x = mx;
            entry.mu_y = my;
            if st.sum_sin != 0.0 || st.sum_cos != 0.0 {
                entry.mu_theta = wrap_angle(st.sum_sin.atan2(st.sum_cos));
            }
            spread_update(entry, st, guards);
        }
    }
    out
}

/// Zero-mean diagonals with spreads re-estimated from self transitions.
pub(crate) fn update_diagonal(out: &mut [Vec<RelationEntry>], stats: &[Vec<PairStats>], guards: &RelationGuards) {
    for i in 0..out.len() {
        let entry = &mut out[i][i];
        entry.set_mean((0.0, 0.0, 0.0));
        spread_update(entry, &stats[i][i], guards);
    }
}

/// Anti-symmetric lag-behind update of the relation matrix.
pub fn update_relations_antisym(
    post: &Posteriors,
    e: &ExperienceSequence,
    previous: &[Vec<RelationEntry>],
    mode: CoordinateMode,
    guards: &RelationGuards,
) -> Vec<Vec<RelationEntry>> {
    let n = previous.len();
    let stats = pair_stats(post, e, previous);
    let mut out = previous.to_vec();
    update_diagonal(&mut out, &stats, guards);
    for i in 0..n {
        for j in (i + 1)..n {
            let (fwd, bwd) = (&stats[i][j], &stats[j][i]);
            if fwd.weight + bwd.weight < guards.min_weight {
                continue;
            }
            let (old_ij, old_ji) = (previous[i][j], previous[j][i]);
            let mut theta = antisym_heading(fwd, bwd, old_ij.kappa, old_ji.kappa, old_ij.mu_theta);
            if mode == CoordinateMode::Relative {
                theta = relative_pair_heading(fwd, bwd, &old_ij, &old_ji, theta);
            }
            let mu = match mode {
                CoordinateMode::Global => {
                    let (fx, fy) = fwd.raw_sum();
                    let (bx, by) = bwd.raw_sum();
                    let solve = |f: f64, b: f64, vf: f64, vb: f64| {
                        (f / vf - b / vb) / (fwd.weight / vf + bwd.weight / vb)
                    };
                    (
                        solve(fx, bx, old_ij.var_x, old_ji.var_x),
                        solve(fy, by, old_ij.var_y, old_ji.var_y),
                    )
                }
                CoordinateMode::Relative => relative_pair_mean(fwd, bwd, &old_ij, &old_ji, theta),
            };
            let back = match mode {
                CoordinateMode::Global => (-mu.0, -mu.1),
                CoordinateMode::Relative => {
                    let r = transform_point(-theta, mu);
                    (-r.0, -r.1)
                }
            };
            out[i][j].set_mean((mu.0, mu.1, theta));
            out[j][i].set_mean((back.0, back.1, -theta));
            spread_update(&mut out[i][j], fwd, guards);
            spread_update(&mut out[j][i], bwd, guards);
        }
    }
    out
}

/// Expected complete-data log-likelihood of the pair at heading `theta`
/// with the planar mean at its conditional optimum, spreads held at their
/// previous values.
fn relative_pair_objective(
    fwd: &PairStats,
    bwd: &PairStats,
    old_ij: &RelationEntry,
    old_ji: &RelationEntry,
    theta: f64,
) -> f64 {
    let (s, c) = theta.sin_cos();
    let heading = old_ij.kappa * (c * fwd.sum_cos + s * fwd.sum_sin) + old_ji.kappa * (c * bwd.sum_cos - s * bwd.sum_sin);
    let mu = relative_pair_mean(fwd, bwd, old_ij, old_ji, theta);
    let back = transform_point(-theta, mu);
    let mut planar = 0.0;
    if fwd.weight > 0.0 {
        let (vx, vy) = fwd.variance_about(mu);
        planar += fwd.weight * (vx / old_ij.var_x + vy / old_ij.var_y);
    }
    if bwd.weight > 0.0 {
        let (vx, vy) = bwd.variance_about((-back.0, -back.1));
        planar += bwd.weight * (vx / old_ji.var_x + vy / old_ji.var_y);
    }
    heading - 0.5 * planar
}

const HEADING_GRID: usize = 32;

/// Relative-mode heading of `(i, j)`. The heading also rotates the reverse
/// pair's planar mean, so the angle-only estimate `start` is refined by
/// maximizing the joint objective; the previous heading is a candidate too,
/// which keeps the step from lowering the objective.
fn relative_pair_heading(
    fwd: &PairStats,
    bwd: &PairStats,
    old_ij: &RelationEntry,
    old_ji: &RelationEntry,
    start: f64,
) -> f64 {
    let f = |t: f64| relative_pair_objective(fwd, bwd, old_ij, old_ji, t);
    let step = std::f64::consts::TAU / HEADING_GRID as f64;
    let mut best = (start, f(start));
    let candidates = (0..HEADING_GRID).map(|k| start + k as f64 * step).chain([old_ij.mu_theta]);
    for t in candidates {
        let v = f(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    // golden-section refinement inside the best grid cell
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    for (t, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (t, v);
        }
    }
    wrap_angle(best.0)
}

/// Weighted least-squares mean of `(i, j)` in `i`'s frame when the reverse
/// readings are tied to it by `μ_ji = -T(-θ) μ_ij`.
fn relative_pair_mean(
    fwd: &PairStats,
    bwd: &PairStats,
    old_ij: &RelationEntry,
    old_ji: &RelationEntry,
    theta: f64,
) -> (f64, f64) {
    // μ_ji = M μ_ij with M = -R(-θ)
    let (s, c) = (-theta).sin_cos();
    let m = [[-c, s], [-s, -c]];
    let wf = [fwd.weight / old_ij.var_x, fwd.weight / old_ij.var_y];
    let wb = [bwd.weight / old_ji.var_x, bwd.weight / old_ji.var_y];
    let (fx, fy) = fwd.raw_sum();
    let (bx, by) = bwd.raw_sum();
    let bsum = [bx / old_ji.var_x, by / old_ji.var_y];
    // normal equations: (Wf + Mᵀ Wb M) μ = Wf r̄f + Mᵀ (Σ r_b / σ²_b)
    let mut a = [[wf[0], 0.0], [0.0, wf[1]]];
    for (r, row) in a.iter_mut().enumerate() {
        for (col, cell) in row.iter_mut().enumerate() {
            *cell += m[0][r] * wb[0] * m[0][col] + m[1][r] * wb[1] * m[1][col];
        }
    }
    let rhs = [
        fx / old_ij.var_x + m[0][0] * bsum[0] + m[1][0] * bsum[1],
        fy / old_ij.var_y + m[0][1] * bsum[0] + m[1][1] * bsum[1],
    ];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < f64::MIN_POSITIVE {
        return (old_ij.mu_x, old_ij.mu_y);
    }
    (
        (rhs[0] * a[1][1] - rhs[1] * a[0][1]) / det,
        (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
    )
}
