#![allow(dead_code)]

use geohmm::experiment::random_model;
use geohmm::inference::obs_prob;
use geohmm::{embed_relations, relation_density, CoordinateMode, ExperienceSequence, GeoHmm, Reading, Step};
use rand::Rng;

/// Random model whose relation means come from random poses, so it is
/// consistent at every constraint level.
pub fn random_geometric_model<R: Rng>(n: usize, obs_dims: &[usize], mode: CoordinateMode, rng: &mut R) -> GeoHmm {
    let mut m = random_model(n, obs_dims, mode, 1.0, rng);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let th: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let means = embed_relations(&x, &y, &th, mode);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let e = &mut m.relations[i][j];
                e.set_mean(means[i][j]);
                e.var_x = rng.random_range(0.3..2.0);
                e.var_y = rng.random_range(0.3..2.0);
                e.kappa = rng.random_range(0.0..5.0);
            }
        }
    }
    m.start_state = rng.random_range(0..n);
    m
}

/// Arbitrary sequence over the model's alphabet; readings need not come
/// from the model.
pub fn random_sequence<R: Rng>(obs_dims: &[usize], len: usize, rng: &mut R) -> ExperienceSequence {
    let steps = (0..len)
        .map(|t| Step {
            obs: obs_dims.iter().map(|&k| rng.random_range(0..k)).collect(),
            reading: (t > 0).then(|| {
                Reading::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0), rng.random_range(-3.0..3.0))
            }),
        })
        .collect();
    ExperienceSequence::new(steps).unwrap()
}

pub struct Enumerated {
    pub loglik: f64,
    pub gamma: Vec<Vec<f64>>,
    pub xi: Vec<Vec<Vec<f64>>>,
}

/// Joint probability of every state path, summed explicitly.
pub fn enumerate_paths(model: &GeoHmm, e: &ExperienceSequence, use_odometry: bool) -> Enumerated {
    let n = model.n_states();
    let t_len = e.len();
    let mut gamma = vec![vec![0.0; n]; t_len];
    let mut xi = vec![vec![vec![0.0; n]; n]; t_len - 1];
    let mut total = 0.0;
    let mut path = vec![0usize; t_len];
    let paths = n.pow(t_len as u32 - 1);
    for code in 0..paths {
        let mut c = code;
        path[0] = model.start_state;
        for slot in path.iter_mut().skip(1) {
            *slot = c % n;
            c /= n;
        }
        let mut p = obs_prob(model, path[0], &e.steps[0].obs).unwrap();
        for t in 1..t_len {
            let (i, j) = (path[t - 1], path[t]);
            p *= model.transitions[i][j] * obs_prob(model, j, &e.steps[t].obs).unwrap();
            if use_odometry {
                p *= relation_density(e.reading(t), &model.relations[i][j]);
            }
        }
        total += p;
        for t in 0..t_len {
            gamma[t][path[t]] += p;
            if t + 1 < t_len {
                xi[t][path[t]][path[t + 1]] += p;
            }
        }
    }
    for row in &mut gamma {
        row.iter_mut().for_each(|v| *v /= total);
    }
    for slab in &mut xi {
        slab.iter_mut().flatten().for_each(|v| *v /= total);
    }
    Enumerated { loglik: total.ln(), gamma, xi }
}
