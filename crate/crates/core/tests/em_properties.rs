mod common;

use common::random_geometric_model;
use geohmm::estimation::{
    constrained_two_normal_mle, em_learn, update_relations_antisym, LearnConfig, RelationGuards,
};
use geohmm::inference::Posteriors;
use geohmm::simgen::sample_sequence;
use geohmm::{check_consistency, ConstraintLevel, CoordinateMode, ExperienceSequence, GeoHmm, Reading, Step};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNS: usize = 50;

struct Run {
    monotone: bool,
    worst_residual: f64,
}

fn learn_random(level: ConstraintLevel, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8);
    let t_len = rng.random_range(50..=400);
    let mode = if rng.random_bool(0.5) { CoordinateMode::Global } else { CoordinateMode::Relative };
    let truth = random_geometric_model(n, &[3, 2], mode, &mut rng);
    let e = sample_sequence(&truth, t_len, &mut rng).unwrap();
    let mut init = random_geometric_model(n, &[3, 2], mode, &mut rng);
    init.start_state = truth.start_state;
    let cfg = LearnConfig { constraint_level: level, mode, max_iters: 60, ..Default::default() };
    let (model, report) = em_learn(&e, &init, &cfg).unwrap();
    let last = check_consistency(&model, level, 1e-9);
    assert!(last.is_consistent(), "seed {seed}: final model violates {level:?}: {last}");
    Run {
        monotone: report.is_monotone(),
        worst_residual: report.constraint_residuals.iter().copied().fold(0.0, f64::max),
    }
}

#[test]
fn exact_levels_are_monotone_and_consistent() {
    for level in [ConstraintLevel::Unconstrained, ConstraintLevel::AntiSymmetric] {
        for seed in 0..RUNS as u64 {
            let run = learn_random(level, 1000 + seed);
            assert!(run.monotone, "{level:?} seed {seed} decreased the log-likelihood");
            assert_eq!(run.worst_residual, 0.0, "{level:?} seed {seed}");
        }
    }
}

#[test]
fn additive_level_is_mostly_monotone_and_always_consistent() {
    let runs: Vec<Run> = (0..RUNS as u64).map(|s| learn_random(ConstraintLevel::Additive, 2000 + s)).collect();
    assert!(runs.iter().all(|r| r.worst_residual == 0.0));
    let monotone = runs.iter().filter(|r| r.monotone).count();
    eprintln!("additive: {monotone}/{RUNS} monotone");
    assert!(monotone * 10 >= RUNS * 9, "{monotone}/{RUNS} monotone");
}

/// Two states visited so that `p` are readings along 0→1 and `q` along 1→0.
fn two_state_problem(p: &[f64], q: &[f64]) -> (ExperienceSequence, Posteriors) {
    let pairs: Vec<(usize, usize, f64)> =
        p.iter().map(|&v| (0, 1, v)).chain(q.iter().map(|&v| (1, 0, v))).collect();
    let mut steps = vec![Step { obs: vec![0], reading: None }];
    let mut xi = Vec::new();
    for &(i, j, v) in &pairs {
        steps.push(Step { obs: vec![0], reading: Some(Reading::new(v, 0.0, 0.0)) });
        let mut slab = vec![vec![0.0; 2]; 2];
        slab[i][j] = 1.0;
        xi.push(slab);
    }
    let gamma = vec![vec![0.5, 0.5]; steps.len()];
    (ExperienceSequence::new(steps).unwrap(), Posteriors { gamma, xi })
}

#[test]
fn lag_behind_update_reaches_the_constrained_mle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let guards = RelationGuards { var_floor: 1e-9, kappa_max: 1e4, min_weight: 1e-12 };
    for case in 0..20 {
        let mu = rng.random_range(-3.0..3.0);
        let (sp, sq) = (rng.random_range(0.3..2.0), rng.random_range(0.3..2.0));
        let p: Vec<f64> = (0..rng.random_range(3..12)).map(|_| mu + sp * rng.random_range(-1.7..1.7)).collect();
        let q: Vec<f64> = (0..rng.random_range(3..12)).map(|_| -mu + sq * rng.random_range(-1.7..1.7)).collect();
        let want = constrained_two_normal_mle(&p, &q, 1e-9).unwrap();

        let (e, post) = two_state_problem(&p, &q);
        let mut rel = GeoHmm::uniform(2, &[1], CoordinateMode::Global, 1.0).relations;
        rel[0][1].mu_x = want.mu + 0.5;
        rel[1][0].mu_x = -rel[0][1].mu_x;
        for _ in 0..20_000 {
            rel = update_relations_antisym(&post, &e, &rel, CoordinateMode::Global, &guards);
        }
        let got = (rel[0][1].mu_x, rel[0][1].var_x, rel[1][0].var_x);
        assert!((got.0 - want.mu).abs() < 1e-6, "case {case}: mu {} vs {}", got.0, want.mu);
        assert!((got.1 - want.var_p).abs() < 1e-6, "case {case}: var_p {} vs {}", got.1, want.var_p);
        assert!((got.2 - want.var_q).abs() < 1e-6, "case {case}: var_q {} vs {}", got.2, want.var_q);
        assert_eq!(rel[1][0].mu_x, -rel[0][1].mu_x);
    }
}

