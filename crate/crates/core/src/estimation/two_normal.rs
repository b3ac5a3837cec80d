//! Joint maximum likelihood for two normal samples with opposite means.
//!
//! `P ~ N(μ, σ_P²)` and `Q ~ N(-μ, σ_Q²)`. Profiling out the variances
//! leaves a cubic stationarity condition in μ; every root lies between
//! `p̄` and `-q̄`.

use crate::error::{GeoError, Result};

/// Fitted `(μ_P, σ_P², σ_Q²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoNormalFit {
    pub mu: f64,
    pub var_p: f64,
    pub var_q: f64,
}

impl TwoNormalFit {
    /// Joint log-likelihood of the samples under this fit.
    pub fn log_likelihood(&self, p: &[f64], q: &[f64]) -> f64 {
        let ll = |xs: &[f64], m: f64, v: f64| {
            xs.iter()
                .map(|x| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v))
                .sum::<f64>()
        };
        ll(p, self.mu, self.var_p) + ll(q, -self.mu, self.var_q)
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

/// Constrained MLE of `(μ_P, σ_P², σ_Q²)` under `μ_Q = -μ_P`.
///
/// Samples that are exactly consistent with the constraint and have no
/// spread get variances at `var_floor`. Any other arrangement that lets one
/// variance collapse to zero (a single sample, or zero spread on one side
/// only) has an unbounded likelihood and is reported as degenerate.
pub fn constrained_two_normal_mle(p: &[f64], q: &[f64], var_floor: f64) -> Result<TwoNormalFit> {
    if p.is_empty() || q.is_empty() {
        return Err(GeoError::Input("both samples must be nonempty".into()));
    }
    if p.iter().chain(q).any(|x| !x.is_finite()) {
        return Err(GeoError::Input("samples must be finite".into()));
    }
    let (n, k) = (p.len() as f64, q.len() as f64);
    let (a, vp) = moments(p);
    let (qbar, vq) = moments(q);
    let b = -qbar;
    if vp == 0.0 && vq == 0.0 && a == b && p.len() > 1 && q.len() > 1 {
        return Ok(TwoNormalFit { mu: a, var_p: var_floor, var_q: var_floor });
    }
    if p.len() < 2 || q.len() < 2 || vp == 0.0 || vq == 0.0 {
        return Err(GeoError::Degenerate("a variance collapses to zero; likelihood is unbounded".into()));
    }

    // n (a - μ) (vQ + (b - μ)²) + k (b - μ) (vP + (a - μ)²) = 0
    let am = [a, -1.0];
    let bm = [b, -1.0];
    let sq_b = poly_mul(&bm, &bm);
    let sq_a = poly_mul(&am, &am);
    let left = poly_mul(&am, &[vq + sq_b[0], sq_b[1], sq_b[2]]);
    let right = poly_mul(&bm, &[vp + sq_a[0], sq_a[1], sq_a[2]]);
    let cubic: Vec<f64> = left.iter().zip(&right).map(|(l, r)| n * l + k * r).collect();
    let deriv: Vec<f64> = (1..cubic.len()).map(|i| i as f64 * cubic[i]).collect();

    let profile = |mu: f64| -0.5 * n * (vp + (a - mu).powi(2)).ln() - 0.5 * k * (vq + (b - mu).powi(2)).ln();

    let (lo, hi) = (a.min(b), a.max(b));
    let mut roots = Vec::new();
    if lo == hi {
        roots.push(lo);
    } else {
        const CELLS: usize = 512;
        let at = |i: usize| lo + (hi - lo) * i as f64 / CELLS as f64;
        let mut prev = poly_eval(&cubic, lo);
        for i in 1..=CELLS {
            let (x0, x1) = (at(i - 1), at(i));
            let f1 = poly_eval(&cubic, x1);
            if prev == 0.0 {
                roots.push(x0);
            } else if prev.signum() != f1.signum() {
                let (mut l, mut r, mut fl) = (x0, x1, prev);
                for _ in 0..200 {
                    let m = 0.5 * (l + r);
                    let fm = poly_eval(&cubic, m);
                    if fm == 0.0 || r - l <= f64::EPSILON * m.abs().max(1.0) {
                        l = m;
                        r = m;
                        break;
                    }
                    if fm.signum() == fl.signum() {
                        l = m;
                        fl = fm;
                    } else {
                        r = m;
                    }
                }
                roots.push(0.5 * (l + r));
            }
            prev = f1;
        }
        if prev == 0.0 {
            roots.push(hi);
        }
        // tangential roots are invisible to sign changes; scan the profile too
        let best_cell = (0..=CELLS).max_by(|&i, &j| profile(at(i)).total_cmp(&profile(at(j)))).unwrap();
        roots.push(at(best_cell));
    }
    let mut mu = roots.into_iter().max_by(|x, y| profile(*x).total_cmp(&profile(*y))).unwrap();
    for _ in 0..5 {
        let d = poly_eval(&deriv, mu);
        if d == 0.0 {
            break;
        }
        let next = mu - poly_eval(&cubic, mu) / d;
        if !(next >= lo && next <= hi) || profile(next) < profile(mu) {
            break;
        }
        mu = next;
    }
    Ok(TwoNormalFit {
        mu,
        var_p: (vp + (a - mu).powi(2)).max(var_floor),
        var_q: (vq + (b - mu).powi(2)).max(var_floor),
    })
}
