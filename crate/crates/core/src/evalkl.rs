//! Divergence between the observation-string distributions of two models.
//!
//! Odometry plays no part here: both likelihoods are computed with the
//! relation densities switched off.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::inference::log_likelihood;
use crate::model::GeoHmm;
use crate::simgen::sample_sequence;

/// Largest number of (string, path) terms [`kl_exact_small`] will sum.
pub const EXACT_TERM_LIMIT: f64 = 1e7;

pub const DEFAULT_KL_LENGTH: usize = 1000;
pub const DEFAULT_KL_SEQUENCES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    /// Nats per symbol; `+∞` when `infinite` is set.
    pub value: f64,
    pub n_sequences: usize,
    pub seq_length: usize,
    /// Standard error of the per-sequence values (0 for a single sequence).
    pub std_error: f64,
    /// The learned model gave some sampled sequence zero probability.
    pub infinite: bool,
}

fn check_alphabets(a: &GeoHmm, b: &GeoHmm) -> Result<()> {
    if a.obs_dims != b.obs_dims {
        return Err(GeoError::Input(format!(
            "observation alphabets differ: {:?} vs {:?}",
            a.obs_dims, b.obs_dims
        )));
    }
    Ok(())
}

/// Monte Carlo estimate from `n` sequences of length `length` drawn from
/// `truth`.
pub fn kl_sampled<R: Rng + ?Sized>(
    truth: &GeoHmm,
    learned: &GeoHmm,
    length: usize,
    n: usize,
    rng: &mut R,
) -> Result<KlEstimate> {
    check_alphabets(truth, learned)?;
    learned.validate()?;
    if length == 0 || n == 0 {
        return Err(GeoError::Input("length and sequence count must be positive".into()));
    }
    let mut values = Vec::with_capacity(n);
    let mut infinite = false;
    for _ in 0..n {
        let e = sample_sequence(truth, length, rng)?;
        let lt = log_likelihood(truth, &e, false)?;
        match log_likelihood(learned, &e, false) {
            Ok(ll) => values.push((lt - ll) / length as f64),
            Err(GeoError::ImpossibleSequence { .. }) => infinite = true,
            Err(err) => return Err(err),
        }
    }
    if infinite {
        return Ok(KlEstimate { value: f64::INFINITY, n_sequences: n, seq_length: length, std_error: 0.0, infinite });
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std_error = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    Ok(KlEstimate { value: mean, n_sequences: n, seq_length: length, std_error, infinite })
}

/// Exact per-symbol divergence over all observation strings of length
/// `horizon`, each string probability summed over every state path.
pub fn kl_exact_small(truth: &GeoHmm, learned: &GeoHmm, horizon: usize) -> Result<f64> {
    check_alphabets(truth, learned)?;
    if horizon == 0 {
        return Err(GeoError::Input("horizon must be positive".into()));
    }
    let symbols: usize = truth.obs_dims.iter().product();
    let n = truth.n_states().max(learned.n_states());
    let terms = (symbols as f64).powi(horizon as i32) * (n as f64).powi(horizon as i32);
    if terms > EXACT_TERM_LIMIT {
        return Err(GeoError::Input(format!("{terms:e} terms exceed the enumeration limit")));
    }
    let decode = |mut code: usize| -> Vec<usize> {
        truth
            .obs_dims
            .iter()
            .map(|&k| {
                let o = code % k;
                code /= k;
                o
            })
            .collect()
    };
    let alphabet: Vec<Vec<usize>> = (0..symbols).map(decode).collect();
    let mut string = vec![0usize; horizon];
    let mut kl = 0.0;
    loop {
        let obs: Vec<&[usize]> = string.iter().map(|&c| alphabet[c].as_slice()).collect();
        let p = path_sum(truth, &obs);
        if p > 0.0 {
            let q = path_sum(learned, &obs);
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += p * (p.ln() - q.ln());
        }
        // odometer increment over the strings
        let mut pos = 0;
        loop {
            if pos == horizon {
                return Ok((kl / horizon as f64).max(0.0));
            }
            string[pos] += 1;
            if string[pos] < symbols {
                break;
            }
            string[pos] = 0;
            pos += 1;
        }
    }
}

fn emission(model: &GeoHmm, state: usize, v: &[usize]) -> f64 {
    v.iter().enumerate().map(|(d, &o)| model.emissions[d][state][o]).product()
}

/// Probability of an observation string by explicit enumeration of paths.
fn path_sum(model: &GeoHmm, obs: &[&[usize]]) -> f64 {
    fn walk(model: &GeoHmm, obs: &[&[usize]], t: usize, state: usize, acc: f64) -> f64 {
        let acc = acc * emission(model, state, obs[t]);
        if acc == 0.0 {
            return 0.0;
        }
        if t + 1 == obs.len() {
            return acc;
        }
        (0..model.n_states())
            .map(|j| {
                let a = model.transitions[state][j];
                if a == 0.0 {
                    0.0
                } else {
                    walk(model, obs, t + 1, j, acc * a)
                }
            })
            .sum()
    }
    walk(model, obs, 0, model.start_state, 1.0)
}
