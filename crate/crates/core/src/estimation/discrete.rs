//! Transition and observation re-estimation.

use crate::inference::Posteriors;
use crate::model::ExperienceSequence;

/// Maximizes `Σ c_o log p_o` over distributions with `p_o >= floor`.
///
/// Entries whose proportional share falls under the floor are pinned to it
/// and the remaining mass is shared in proportion to the counts. Returns
/// `None` when every count is zero.
pub fn floored_normalize(counts: &[f64], floor: f64) -> Option<Vec<f64>> {
    let k = counts.len();
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    if floor <= 0.0 {
        return Some(counts.iter().map(|c| c / total).collect());
    }
    if floor * k as f64 >= 1.0 {
        return Some(vec![1.0 / k as f64; k]);
    }
    let mut pinned = vec![false; k];
    loop {
        let n_pinned = pinned.iter().filter(|p| **p).count();
        let mass = 1.0 - floor * n_pinned as f64;
        let free: f64 = counts.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(c, _)| c).sum();
        let mut changed = false;
        for o in 0..k {
            if !pinned[o] && (free <= 0.0 || mass * counts[o] / free < floor) {
                pinned[o] = true;
                changed = true;
            }
        }
        if !changed {
            return Some(
                counts
                    .iter()
                    .zip(&pinned)
                    .map(|(c, p)| if *p { floor } else { mass * c / free })
                    .collect(),
            );
        }
    }
}

/// Expected transitions out of each state normalized into a stochastic
/// matrix. Rows that were never visited keep `previous`.
pub fn update_transitions(post: &Posteriors, previous: &[Vec<f64>], floor: f64) -> Vec<Vec<f64>> {
    post.transition_counts()
        .iter()
        .zip(previous)
        .map(|(row, prev)| floored_normalize(row, floor).unwrap_or_else(|| prev.clone()))
        .collect()
}

/// Expected symbol frequencies per state and dimension. States with zero
/// occupancy keep `previous`.
pub fn update_observations(
    post: &Posteriors,
    e: &ExperienceSequence,
    previous: &[Vec<Vec<f64>>],
    floor: f64,
) -> Vec<Vec<Vec<f64>>> {
    let n = post.n_states();
    previous
        .iter()
        .enumerate()
        .map(|(d, prev_table)| {
            let k = prev_table.first().map_or(0, Vec::len);
            let mut counts = vec![vec![0.0; k]; n];
            for (step, g) in e.steps.iter().zip(&post.gamma) {
                let o = step.obs[d];
                for (j, gj) in g.iter().enumerate() {
                    counts[j][o] += gj;
                }
            }
            counts
                .iter()
                .zip(prev_table)
                .map(|(c, prev)| floored_normalize(c, floor).unwrap_or_else(|| prev.clone()))
                .collect()
        })
        .collect()
}
