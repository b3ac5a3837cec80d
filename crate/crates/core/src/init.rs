//! Initial models from bucketed odometry and state tagging.
//!
//! Readings are first clustered into buckets of nearby displacements. The
//! sequence is then walked from the start state, reusing a known relation
//! when a reading matches one and opening a new state otherwise. Each new
//! state receives a pose, so the populated relation table is always the
//! embedding of those poses and therefore consistent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circstats::{angle_diff, kappa_from_sigma, resultant_to_kappa, wrap_angle};
use crate::error::{GeoError, Result};
use crate::model::{
    embed_relations, transform_point, CoordinateMode, ExperienceSequence, GeoHmm, Reading, RelationEntry,
};

/// Pseudo-count added to every transition and emission cell.
pub const SMOOTHING: f64 = 0.05;

/// Spread multiplier for relations that involve states the walk never reached.
const WIDE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketConfig {
    pub sigma_x: f64,
    pub sigma_y: f64,
    /// Radians.
    pub sigma_theta: f64,
    pub bucket_factor: f64,
    pub tag_factor: f64,
}

impl BucketConfig {
    pub fn new(sigma_x: f64, sigma_y: f64, sigma_theta: f64) -> Self {
        Self { sigma_x, sigma_y, sigma_theta, bucket_factor: 1.5, tag_factor: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma_x, self.sigma_y, self.sigma_theta, self.bucket_factor, self.tag_factor];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(GeoError::Input("bucket spreads and factors must be positive".into()))
        }
    }

    /// Per-dimension offsets in units of σ.
    fn scaled(&self, r: &Reading, mu: (f64, f64, f64)) -> [f64; 3] {
        [
            (r.dx - mu.0) / self.sigma_x,
            (r.dy - mu.1) / self.sigma_y,
            angle_diff(r.dtheta, mu.2) / self.sigma_theta,
        ]
    }

    fn within(&self, r: &Reading, mu: (f64, f64, f64), factor: f64) -> bool {
        self.scaled(r, mu).iter().all(|d| d.abs() <= factor)
    }

    fn distance(&self, r: &Reading, mu: (f64, f64, f64)) -> f64 {
        self.scaled(r, mu).iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub id: usize,
    /// Running mean; the heading part is a circular mean.
    pub mean: (f64, f64, f64),
    /// Indices into the reading list.
    pub members: Vec<usize>,
    sum: (f64, f64, f64, f64),
}

impl Bucket {
    fn open(id: usize, r: &Reading, index: usize) -> Self {
        let (s, c) = r.dtheta.sin_cos();
        Self { id, mean: (r.dx, r.dy, wrap_angle(r.dtheta)), members: vec![index], sum: (r.dx, r.dy, s, c) }
    }

    fn zero() -> Self {
        Self { id: 0, mean: (0.0, 0.0, 0.0), members: Vec::new(), sum: (0.0, 0.0, 0.0, 0.0) }
    }

    fn add(&mut self, r: &Reading, index: usize) {
        self.members.push(index);
        if self.id == 0 {
            return;
        }
        let (s, c) = r.dtheta.sin_cos();
        self.sum = (self.sum.0 + r.dx, self.sum.1 + r.dy, self.sum.2 + s, self.sum.3 + c);
        let n = self.members.len() as f64;
        self.mean = (self.sum.0 / n, self.sum.1 / n, wrap_angle(self.sum.2.atan2(self.sum.3)));
    }

    /// Sample variances of x and y, and the mean resultant length of θ.
    fn spread(&self, readings: &[Reading]) -> (f64, f64, f64) {
        let n = self.members.len() as f64;
        if n == 0.0 {
            return (0.0, 0.0, 1.0);
        }
        let (mut vx, mut vy, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
        for &m in &self.members {
            let r = &readings[m];
            vx += (r.dx - self.mean.0).powi(2);
            vy += (r.dy - self.mean.1).powi(2);
            s += r.dtheta.sin();
            c += r.dtheta.cos();
        }
        (vx / n, vy / n, (s * s + c * c).sqrt() / n)
    }
}

/// Single-pass clustering. Bucket 0 is the zero relation and keeps a zero
/// mean; the others are opened in order of first appearance. Returns the
/// buckets and the bucket id of every reading.
pub fn bucketize(readings: &[Reading], cfg: &BucketConfig) -> (Vec<Bucket>, Vec<usize>) {
    let mut buckets = vec![Bucket::zero()];
    let mut assignment = Vec::with_capacity(readings.len());
    for (t, r) in readings.iter().enumerate() {
        match buckets.iter().position(|b| cfg.within(r, b.mean, cfg.bucket_factor)) {
            Some(k) => {
                buckets[k].add(r, t);
                assignment.push(k);
            }
            None => {
                let id = buckets.len();
                buckets.push(Bucket::open(id, r, t));
                assignment.push(id);
            }
        }
    }
    (buckets, assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggingResult {
    /// One state per step; `state_sequence[0]` is the start state 0.
    pub state_sequence: Vec<usize>,
    /// Populated entries of the relation table.
    pub relation_means: Vec<Vec<Option<(f64, f64, f64)>>>,
    pub bucket_assoc: BTreeMap<(usize, usize), usize>,
    /// Poses `(x, y, θ)` of the states the walk reached.
    pub poses: Vec<(f64, f64, f64)>,
}

impl TaggingResult {
    pub fn n_allocated(&self) -> usize {
        self.poses.len()
    }
}

/// Walks the readings from state 0, assigning origin and destination states.
pub fn tag_states(
    readings: &[Reading],
    buckets: &[Bucket],
    assignment: &[usize],
    n_max: usize,
    mode: CoordinateMode,
    cfg: &BucketConfig,
) -> Result<TaggingResult> {
    if n_max == 0 {
        return Err(GeoError::Input("at least one state is required".into()));
    }
    if assignment.len() != readings.len() {
        return Err(GeoError::Input("assignment and readings differ in length".into()));
    }
    let mut poses = vec![(0.0, 0.0, 0.0)];
    let mut assoc = BTreeMap::new();
    assoc.insert((0, 0), 0);
    let mut means = embed(&poses, mode);
    let mut current = 0;
    let mut seq = vec![0];
    for (r, &b) in readings.iter().zip(assignment) {
        let alloc = poses.len();
        let next = if let Some(j) = (0..alloc).find(|&j| assoc.get(&(current, j)) == Some(&b)) {
            j
        } else {
            let closest = (0..alloc)
                .filter(|&j| cfg.within(r, means[current][j], cfg.tag_factor))
                .min_by(|&i, &j| cfg.distance(r, means[current][i]).total_cmp(&cfg.distance(r, means[current][j])));
            match closest {
                Some(j) => {
                    assoc.entry((current, j)).or_insert(b);
                    j
                }
                None if alloc < n_max => {
                    let m = buckets[b].mean;
                    let (x, y, th) = poses[current];
                    let d = match mode {
                        CoordinateMode::Global => (m.0, m.1),
                        CoordinateMode::Relative => transform_point(th, (m.0, m.1)),
                    };
                    poses.push((x + d.0, y + d.1, wrap_angle(th + m.2)));
                    assoc.insert((alloc, alloc), 0);
                    assoc.insert((current, alloc), b);
                    means = embed(&poses, mode);
                    alloc
                }
                None => (0..alloc)
                    .min_by(|&i, &j| cfg.distance(r, means[current][i]).total_cmp(&cfg.distance(r, means[current][j])))
                    .expect("state 0 is always allocated"),
            }
        };
        seq.push(next);
        current = next;
    }
    let alloc = poses.len();
    let relation_means = (0..n_max)
        .map(|i| (0..n_max).map(|j| (i < alloc && j < alloc).then(|| means[i][j])).collect())
        .collect();
    Ok(TaggingResult { state_sequence: seq, relation_means, bucket_assoc: assoc, poses })
}

fn embed(poses: &[(f64, f64, f64)], mode: CoordinateMode) -> Vec<Vec<(f64, f64, f64)>> {
    let x: Vec<f64> = poses.iter().map(|p| p.0).collect();
    let y: Vec<f64> = poses.iter().map(|p| p.1).collect();
    let th: Vec<f64> = poses.iter().map(|p| p.2).collect();
    embed_relations(&x, &y, &th, mode)
}

/// Initial model with `n` states: bucketing, tagging, then smoothed counts.
pub fn init_model(
    e: &ExperienceSequence,
    n: usize,
    obs_dims: &[usize],
    mode: CoordinateMode,
    cfg: &BucketConfig,
) -> Result<GeoHmm> {
    cfg.validate()?;
    if e.len() < 2 {
        return Err(GeoError::Input("initialization needs at least two steps".into()));
    }
    if n == 0 {
        return Err(GeoError::Input("at least one state is required".into()));
    }
    let readings = e.readings();
    let (buckets, assignment) = bucketize(&readings, cfg);
    let tags = tag_states(&readings, &buckets, &assignment, n, mode, cfg)?;

    let mut model = GeoHmm::uniform(n, obs_dims, mode, 1.0);
    model.check_sequence(e)?;

    let mut trans = vec![vec![SMOOTHING; n]; n];
    for w in tags.state_sequence.windows(2) {
        trans[w[0]][w[1]] += 1.0;
    }
    model.transitions = trans.into_iter().map(normalize).collect();
    model.emissions = obs_dims
        .iter()
        .enumerate()
        .map(|(d, &k)| {
            let mut counts = vec![vec![SMOOTHING; k]; n];
            for (step, &s) in e.steps.iter().zip(&tags.state_sequence) {
                counts[s][step.obs[d]] += 1.0;
            }
            counts.into_iter().map(normalize).collect()
        })
        .collect();

    let mut poses = tags.poses.clone();
    poses.resize(n, (0.0, 0.0, 0.0));
    let means = embed(&poses, mode);
    let alloc = tags.n_allocated();
    let (sx2, sy2) = (cfg.sigma_x.powi(2), cfg.sigma_y.powi(2));
    let base_kappa = kappa_from_sigma(cfg.sigma_theta);
    let tight_kappa = kappa_from_sigma(0.5 * cfg.sigma_theta);
    for i in 0..n {
        for j in 0..n {
            model.relations[i][j] = if i == j {
                RelationEntry::new((0.0, 0.0, 0.0), sx2, sy2, base_kappa)
            } else if i < alloc && j < alloc {
                RelationEntry::new(means[i][j], sx2, sy2, base_kappa)
            } else {
                let w = WIDE_FACTOR * WIDE_FACTOR;
                RelationEntry::new(means[i][j], w * sx2, w * sy2, 0.0)
            };
        }
    }
    for (&(i, j), &b) in &tags.bucket_assoc {
        if i == j || b == 0 {
            continue;
        }
        let (vx, vy, res) = buckets[b].spread(&readings);
        let vx = vx.max(0.25 * sx2);
        let vy = vy.max(0.25 * sy2);
        let kappa = resultant_to_kappa(res).min(tight_kappa);
        for (a, c) in [(i, j), (j, i)] {
            let entry = &mut model.relations[a][c];
            *entry = RelationEntry::new(entry.mean(), vx, vy, kappa);
        }
    }
    model.validate()?;
    Ok(model)
}

fn normalize(row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::log_likelihood;
    use crate::model::{check_means, ConstraintLevel, Step};

    fn corner_readings() -> Vec<Reading> {
        [
            (2.0, 94.0, 92.0),
            (1994.0, 0.0, 88.0),
            (3.0, -93.0, 86.0),
            (-1999.0, 1.0, 94.0),
            (-4.0, 102.0, 91.0),
            (1998.0, -5.0, 90.0),
            (-2.0, -106.0, 91.0),
            (-2003.0, 7.0, 87.0),
        ]
        .iter()
        .map(|&(x, y, t): &(f64, f64, f64)| Reading::new(x, y, t.to_radians()))
        .collect()
    }

    fn corner_cfg() -> BucketConfig {
        BucketConfig::new(20.0, 20.0, 20f64.to_radians())
    }

    #[test]
    fn corner_readings_bucket_in_pairs() {
        let (buckets, assignment) = bucketize(&corner_readings(), &corner_cfg());
        assert_eq!(assignment, vec![1, 2, 3, 4, 1, 2, 3, 4]);
        assert!(buckets[0].members.is_empty());
        let want = [(-1.0, 98.0, 91.5), (1996.0, -2.5, 89.0), (0.5, -99.5, 88.5), (-2001.0, 4.0, 90.5)];
        for (b, w) in buckets[1..].iter().zip(want) {
            assert!((b.mean.0 - w.0).abs() < 1e-9 && (b.mean.1 - w.1).abs() < 1e-9);
            assert!((b.mean.2.to_degrees() - w.2).abs() < 1e-9, "{}", b.mean.2.to_degrees());
        }
    }

    #[test]
    fn corner_state_sequence_cycles() {
        let r = corner_readings();
        let cfg = corner_cfg();
        let (buckets, assignment) = bucketize(&r, &cfg);
        let tags = tag_states(&r, &buckets, &assignment, 4, CoordinateMode::Global, &cfg).unwrap();
        assert_eq!(tags.state_sequence, vec![0, 1, 2, 3, 0, 1, 2, 3, 0]);
        assert_eq!(tags.bucket_assoc.get(&(3, 0)), Some(&4));

        // after three readings μ[3][0] closes the loop and is within 1σ of reading 4
        let partial = tag_states(&r[..3], &buckets, &assignment[..3], 4, CoordinateMode::Global, &cfg).unwrap();
        let m30 = partial.relation_means[3][0].unwrap();
        let legs: Vec<_> = [(0, 1), (1, 2), (2, 3)].iter().map(|&(i, j)| partial.relation_means[i][j].unwrap()).collect();
        let sum = legs.iter().fold((0.0, 0.0, 0.0), |a, m| (a.0 + m.0, a.1 + m.1, a.2 + m.2));
        assert!((m30.0 + sum.0).abs() < 1e-9 && (m30.1 + sum.1).abs() < 1e-9);
        assert!(angle_diff(m30.2, -sum.2).abs() < 1e-12);
        assert!(cfg.within(&r[3], m30, 1.0));

        let full: Vec<Vec<_>> = tags.relation_means.iter().map(|row| row.iter().map(|m| m.unwrap()).collect()).collect();
        assert!(check_means(&full, CoordinateMode::Global, ConstraintLevel::Additive, 1e-9).is_consistent());
    }

    #[test]
    fn identical_and_zero_readings() {
        let cfg = corner_cfg();
        let same = vec![Reading::new(100.0, 5.0, 0.3); 6];
        let (b, a) = bucketize(&same, &cfg);
        assert_eq!(b.len(), 2);
        assert!(a.iter().all(|&k| k == 1));

        let zeros = vec![Reading::new(0.0, 0.0, 0.0); 5];
        let (b, a) = bucketize(&zeros, &cfg);
        let tags = tag_states(&zeros, &b, &a, 3, CoordinateMode::Global, &cfg).unwrap();
        assert_eq!(tags.state_sequence, vec![0; 6]);
    }

    fn corner_sequence() -> ExperienceSequence {
        let mut steps = vec![Step { obs: vec![0], reading: None }];
        steps.extend(corner_readings().into_iter().map(|r| Step { obs: vec![0], reading: Some(r) }));
        ExperienceSequence::new(steps).unwrap()
    }

    #[test]
    fn corner_model_is_deterministic() {
        let e = corner_sequence();
        let model = init_model(&e, 4, &[1], CoordinateMode::Global, &corner_cfg()).unwrap();
        for (i, row) in model.transitions.iter().enumerate() {
            let arg = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(arg, (i + 1) % 4);
            assert!(row.iter().all(|p| *p > 0.0));
        }
        assert!(crate::model::check_consistency(&model, ConstraintLevel::Additive, 1e-9).is_consistent());
        let again = init_model(&e, 4, &[1], CoordinateMode::Global, &corner_cfg()).unwrap();
        assert_eq!(model, again);
        assert!(init_model(&e.prefix(1), 4, &[1], CoordinateMode::Global, &corner_cfg()).is_err());
    }

    #[test]
    fn beats_uniform_on_square_loop() {
        for mode in [CoordinateMode::Global, CoordinateMode::Relative] {
            let mut steps = vec![Step { obs: vec![0], reading: None }];
            let mut heading: f64 = 0.0;
            for t in 1..40 {
                let jitter = ((t * 37 % 11) as f64 - 5.0) * 0.5;
                let local = (jitter, 100.0 + jitter, std::f64::consts::FRAC_PI_2 + 0.01 * jitter);
                let (dx, dy) = match mode {
                    CoordinateMode::Global => transform_point(heading, (local.0, local.1)),
                    CoordinateMode::Relative => (local.0, local.1),
                };
                heading += local.2;
                steps.push(Step { obs: vec![t % 4], reading: Some(Reading::new(dx, dy, local.2)) });
            }
            let e = ExperienceSequence::new(steps).unwrap();
            let cfg = BucketConfig::new(10.0, 10.0, 0.2);
            let model = init_model(&e, 4, &[4], mode, &cfg).unwrap();
            let uniform = GeoHmm::uniform(4, &[4], mode, 100.0);
            let (li, lu) = (log_likelihood(&model, &e, true).unwrap(), log_likelihood(&uniform, &e, true).unwrap());
            assert!(li > lu, "{mode:?}: {li} vs {lu}");
        }
    }

    proptest::proptest! {
        #[test]
        fn members_fit_at_insertion(raw in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -3.0f64..3.0), 1..40)) {
            let readings: Vec<Reading> = raw.iter().map(|&(x, y, t)| Reading::new(x, y, t)).collect();
            let cfg = BucketConfig::new(10.0, 10.0, 0.5);
            let (buckets, assignment) = bucketize(&readings, &cfg);
            // replay the insertions and check each against the mean at that time
            let mut replay: Vec<Bucket> = vec![Bucket::zero()];
            for (t, (&k, r)) in assignment.iter().zip(&readings).enumerate() {
                if k == replay.len() {
                    replay.push(Bucket::open(k, r, t));
                } else {
                    proptest::prop_assert!(cfg.within(r, replay[k].mean, cfg.bucket_factor));
                    replay[k].add(r, t);
                }
            }
            proptest::prop_assert_eq!(replay.len(), buckets.len());
        }
    }
}
