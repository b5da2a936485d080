//! Frame sets with prescribed key-frame rate, scene hit rate and a
//! Dirichlet-controlled spread of key frames across scenes.
//!
//! Scene proportions are drawn from `Dir(C * w)` with
//! `w_i = l_i^beta / sum_j l_j^beta`: `beta` moves the target between
//! uniform (`beta = 0`) and duration-proportional (`beta = 1`) allocation and
//! `C` sets how tightly draws follow it. `C = +inf` yields `w` itself.
//!
//! Random draws for a sample come from one stream derived from
//! `(spec.seed, sample id)` and are consumed in a fixed order: hit-scene
//! subset, scene proportions, in-scene frames (hit-scene order), non-key
//! frames.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::random::{choose_without_replacement, ln_gamma_variate, rng_for, rng_from_seed};
use crate::timeline::{AnnotationSample, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub target_kfr: f64,
    pub target_shr: f64,
    /// Dirichlet concentration `C`.
    pub concentration: f64,
    pub beta: f64,
    pub budget: usize,
    pub seed: u64,
}

impl ControlSpec {
    /// Key frames split in proportion to scene duration, as in the KFR/SHR grid.
    pub fn duration_proportional(target_kfr: f64, target_shr: f64, budget: usize, seed: u64) -> Self {
        ControlSpec {
            target_kfr,
            target_shr,
            concentration: f64::INFINITY,
            beta: 1.0,
            budget,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("target_kfr", self.target_kfr), ("target_shr", self.target_shr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(KfsError::precondition(format!("{name}={v} outside [0, 1]")));
            }
        }
        if !(self.concentration > 0.0) {
            return Err(KfsError::precondition(format!(
                "concentration C={} must be > 0",
                self.concentration
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(KfsError::precondition(format!("beta={} must be >= 0", self.beta)));
        }
        if self.budget == 0 {
            return Err(KfsError::precondition("budget must be at least 1"));
        }
        Ok(())
    }
}

/// `l_i^beta / sum_j l_j^beta`.
pub fn duration_weights(durations: &[u32], beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = durations.iter().map(|&l| (l as f64).powf(beta)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|r| r / sum).collect()
}

fn check_dirichlet_args(durations: &[u32], concentration: f64, beta: f64) -> Result<()> {
    if durations.is_empty() {
        return Err(KfsError::precondition("need at least one scene"));
    }
    if durations.contains(&0) {
        return Err(KfsError::precondition("scene durations must be >= 1"));
    }
    if !(concentration > 0.0) {
        return Err(KfsError::precondition(format!("C={concentration} must be > 0")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(KfsError::precondition(format!("beta={beta} must be >= 0")));
    }
    Ok(())
}

/// One draw of scene proportions from `Dir(C * w)` using `rng`.
///
/// Gamma variates are combined in log space, so vanishing shapes
/// (small `C`) never produce an all-zero vector.
pub fn dirichlet_proportions_with<R: Rng + ?Sized>(
    rng: &mut R,
    durations: &[u32],
    concentration: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    check_dirichlet_args(durations, concentration, beta)?;
    if durations.len() == 1 {
        return Ok(vec![1.0]);
    }
    let w = duration_weights(durations, beta);
    if concentration.is_infinite() {
        return Ok(w);
    }
    let logs: Vec<f64> = w
        .iter()
        .map(|&wi| ln_gamma_variate(rng, concentration * wi))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = scaled.iter().sum();
    Ok(scaled.iter().map(|s| s / sum).collect())
}

pub fn dirichlet_proportions(durations: &[u32], concentration: f64, beta: f64, seed: u64) -> Result<Vec<f64>> {
    dirichlet_proportions_with(&mut rng_from_seed(seed), durations, concentration, beta)
}

/// Integer frame counts summing to `n_key` that follow `p`.
///
/// Largest-remainder rounding of `n_key * p`, then any scene left at zero
/// takes a frame from the scene most above its exact share. With fewer
/// frames than scenes, the `n_key` longest scenes get one frame each.
pub fn allocate_scene_counts(p: &[f64], durations: &[u32], n_key: usize) -> Result<Vec<usize>> {
    let m = p.len();
    if m == 0 {
        return Err(KfsError::precondition("need at least one scene"));
    }
    if durations.len() != m {
        return Err(KfsError::precondition(format!(
            "{m} proportions but {} durations",
            durations.len()
        )));
    }
    if n_key < 1 {
        return Err(KfsError::precondition("n_key must be at least 1"));
    }
    if n_key < m {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| durations[b].cmp(&durations[a]).then(a.cmp(&b)));
        let mut counts = vec![0; m];
        for &i in &order[..n_key] {
            counts[i] = 1;
        }
        return Ok(counts);
    }

    let exact: Vec<f64> = p.iter().map(|&pi| n_key as f64 * pi).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut by_remainder: Vec<usize> = (0..m).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().cycle().take(n_key.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    // floor pass can overshoot only through rounding in n_key * p
    while counts.iter().sum::<usize>() > n_key {
        let i = (0..m).max_by(|&a, &b| (counts[a] as f64 - exact[a]).total_cmp(&(counts[b] as f64 - exact[b]))).unwrap();
        counts[i] -= 1;
    }

    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let donor = (0..m)
            .filter(|&i| counts[i] >= 2)
            .max_by(|&a, &b| {
                let ea = counts[a] as f64 - exact[a];
                let eb = counts[b] as f64 - exact[b];
                ea.total_cmp(&eb)
                    .then(counts[a].cmp(&counts[b]))
                    .then(b.cmp(&a))
            })
            .expect("n_key >= m leaves a scene with two frames");
        counts[donor] -= 1;
        counts[empty] += 1;
    }
    Ok(counts)
}

/// A scene whose allocation exceeded its length and was capped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub scene: usize,
    pub requested: usize,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledSet {
    pub frames: SampleSet,
    pub n_key: usize,
    /// Scene indices picked to be hit.
    pub requested_hit_scenes: Vec<usize>,
    /// Scene indices that received at least one frame.
    pub hit_scenes: Vec<usize>,
    /// Key frames placed in each scene, zeros included.
    pub scene_counts: Vec<usize>,
    pub nominal_shr: f64,
    pub clamps: Vec<ClampEvent>,
}

/// Moves frames from over-full scenes to scenes with spare room.
fn clamp_to_capacity(counts: &mut [usize], capacity: &[usize], clamps: &mut Vec<ClampEvent>) {
    let mut overflow = 0;
    for (i, (c, &cap)) in counts.iter_mut().zip(capacity).enumerate() {
        if *c > cap {
            clamps.push(ClampEvent {
                scene: i,
                requested: *c,
                capacity: cap,
            });
            overflow += *c - cap;
            *c = cap;
        }
    }
    for _ in 0..overflow {
        let target = (0..counts.len())
            .filter(|&i| counts[i] < capacity[i])
            .max_by(|&a, &b| {
                (capacity[a] - counts[a])
                    .cmp(&(capacity[b] - counts[b]))
                    .then(b.cmp(&a))
            })
            .expect("total capacity checked beforehand");
        counts[target] += 1;
    }
}

pub fn controlled_frame_set(ann: &AnnotationSample, spec: &ControlSpec) -> Result<ControlledSet> {
    spec.validate()?;
    let n = ann.n_frames();
    let m = ann.scene_count();
    if spec.budget > n {
        return Err(KfsError::Infeasible(format!(
            "budget {} exceeds the {n} frames of sample `{}`",
            spec.budget,
            ann.id()
        )));
    }
    let n_key = (spec.target_kfr * spec.budget as f64).round() as usize;
    if n_key > 0 && m == 0 {
        return Err(KfsError::precondition(format!(
            "sample `{}` has no scenes but target_kfr = {}",
            ann.id(),
            spec.target_kfr
        )));
    }
    let n_hit = if n_key == 0 || spec.target_shr == 0.0 {
        0
    } else {
        ((spec.target_shr * m as f64).round() as usize).clamp(1, m)
    };
    if n_key > 0 && n_hit == 0 {
        return Err(KfsError::precondition(
            "key frames requested with target_shr = 0; no scene may be hit",
        ));
    }

    let mut rng = rng_for(spec.seed, ann.id());
    let scene_ids: Vec<usize> = (0..m).collect();
    let mut requested = choose_without_replacement(&mut rng, &scene_ids, n_hit);
    requested.sort_unstable();

    let mut scene_counts = vec![0usize; m];
    let mut clamps = Vec::new();
    if n_hit > 0 {
        let durations: Vec<u32> = requested.iter().map(|&i| ann.scenes()[i].duration()).collect();
        let capacity: Vec<usize> = durations.iter().map(|&d| d as usize).collect();
        let total_capacity: usize = capacity.iter().sum();
        if n_key > total_capacity {
            return Err(KfsError::Capacity {
                region: format!("hit scenes of `{}`", ann.id()),
                requested: n_key,
                achievable: total_capacity,
            });
        }
        let p = dirichlet_proportions_with(&mut rng, &durations, spec.concentration, spec.beta)?;
        let mut counts = allocate_scene_counts(&p, &durations, n_key)?;
        clamp_to_capacity(&mut counts, &capacity, &mut clamps);
        // clamp events index into the hit subset; report scene indices
        for event in &mut clamps {
            event.scene = requested[event.scene];
        }
        for (&scene, &c) in requested.iter().zip(&counts) {
            scene_counts[scene] = c;
        }
    }

    let mask = ann.key_mask();
    let complement: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let n_other = spec.budget - n_key;
    if n_other > complement.len() {
        return Err(KfsError::Capacity {
            region: format!("non-key frames of `{}`", ann.id()),
            requested: n_other,
            achievable: complement.len(),
        });
    }

    let mut frames = Vec::with_capacity(spec.budget);
    for &scene in &requested {
        let pool = ann.scenes()[scene].frames();
        frames.extend(choose_without_replacement(&mut rng, &pool, scene_counts[scene]));
    }
    frames.extend(choose_without_replacement(&mut rng, &complement, n_other));

    let hit_scenes = (0..m).filter(|&i| scene_counts[i] > 0).collect();
    Ok(ControlledSet {
        frames: SampleSet::from_unsorted(frames, spec.budget, n)?,
        n_key,
        requested_hit_scenes: requested,
        hit_scenes,
        scene_counts,
        nominal_shr: spec.target_shr,
        clamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::key_frame_rate;
    use crate::timeline::{per_scene_counts, Scene, Segment};

    fn ann_with(durations: &[u32], total: u32) -> AnnotationSample {
        let mut start = 0;
        let scenes = durations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let s = Scene {
                    scene_id: i as u32,
                    segments: vec![Segment {
                        segment_id: i as u32,
                        start: start + 5,
                        end: start + 5 + d,
                    }],
                };
                start += d + 10;
                s
            })
            .collect();
        AnnotationSample::new("ctl", total, scenes).unwrap()
    }

    #[test]
    fn dirichlet_edge_cases() {
        assert_eq!(dirichlet_proportions(&[17], 3.0, 1.0, 0).unwrap(), vec![1.0]);
        assert_eq!(duration_weights(&[3, 90, 12], 0.0), vec![1.0 / 3.0; 3]);
        let p = dirichlet_proportions(&[10, 30], f64::INFINITY, 1.0, 0).unwrap();
        assert_eq!(p, vec![0.25, 0.75]);
        let p = dirichlet_proportions(&[10, 30, 5], 0.05, 1.0, 9).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        assert!(dirichlet_proportions(&[], 1.0, 1.0, 0).is_err());
        assert!(dirichlet_proportions(&[1, 2], 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn dirichlet_mean_matches_weights() {
        let durations = [10, 20, 40, 80];
        let w = duration_weights(&durations, 1.0);
        let mut rng = rng_from_seed(123);
        let mut mean = [0.0; 4];
        let draws = 10_000;
        for _ in 0..draws {
            let p = dirichlet_proportions_with(&mut rng, &durations, 5.0, 1.0).unwrap();
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x / draws as f64;
            }
        }
        for (m, wi) in mean.iter().zip(&w) {
            assert!((m - wi).abs() < 0.02, "{m} vs {wi}");
        }
    }

    #[test]
    fn higher_concentration_means_lower_variance() {
        let durations = [10, 20, 40];
        let spread = |c: f64| {
            let mut rng = rng_from_seed(5);
            let draws: Vec<f64> = (0..4000)
                .map(|_| dirichlet_proportions_with(&mut rng, &durations, c, 1.0).unwrap()[2])
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64
        };
        assert!(spread(20.0) < spread(0.05));
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_scene_counts(&[0.5, 0.5], &[5, 5], 4).unwrap(), vec![2, 2]);
        assert_eq!(allocate_scene_counts(&[0.9, 0.1], &[5, 5], 3).unwrap(), vec![2, 1]);
        assert_eq!(allocate_scene_counts(&[1.0], &[5], 5).unwrap(), vec![5]);
        assert_eq!(allocate_scene_counts(&[0.2, 0.3, 0.5], &[4, 9, 2], 2).unwrap(), vec![1, 1, 0]);
        assert_eq!(allocate_scene_counts(&[0.999, 0.0005, 0.0005], &[1, 1, 1], 3).unwrap(), vec![1, 1, 1]);
        assert!(allocate_scene_counts(&[1.0], &[5], 0).is_err());
    }

    #[test]
    fn zero_targets_stay_outside_scenes() {
        let ann = ann_with(&[10, 20], 200);
        let spec = ControlSpec {
            target_kfr: 0.0,
            target_shr: 0.0,
            concentration: 1.0,
            beta: 1.0,
            budget: 16,
            seed: 4,
        };
        let out = controlled_frame_set(&ann, &spec).unwrap();
        assert_eq!(out.frames.len(), 16);
        assert_eq!(key_frame_rate(&out.frames, &ann).unwrap(), 0.0);
        assert!(out.hit_scenes.is_empty());
    }

    #[test]
    fn full_targets_follow_durations() {
        let ann = ann_with(&[10, 30, 20], 300);
        for seed in 0..100 {
            let spec = ControlSpec {
                target_kfr: 1.0,
                target_shr: 1.0,
                concentration: 1e9,
                beta: 1.0,
                budget: 24,
                seed,
            };
            let out = controlled_frame_set(&ann, &spec).unwrap();
            assert_eq!(key_frame_rate(&out.frames, &ann).unwrap(), 1.0);
            let counts = per_scene_counts(&out.frames, &ann).unwrap();
            for (c, l) in counts.iter().zip([10.0, 30.0, 20.0]) {
                let ideal = 24.0 * l / 60.0;
                assert!((*c as f64 - ideal).abs() <= 1.0, "{counts:?}");
            }
        }
    }

    #[test]
    fn grid_point_on_five_scenes() {
        let ann = ann_with(&[8, 12, 6, 20, 9], 400);
        let spec = ControlSpec::duration_proportional(0.6, 0.8, 40, 11);
        let out = controlled_frame_set(&ann, &spec).unwrap();
        assert_eq!(out.n_key, 24);
        assert_eq!(key_frame_rate(&out.frames, &ann).unwrap(), 0.6);
        assert_eq!(out.hit_scenes.len(), 4);
        let counts = per_scene_counts(&out.frames, &ann).unwrap();
        assert_eq!(counts, out.scene_counts);
    }

    #[test]
    fn capacity_and_feasibility_errors() {
        let ann = ann_with(&[3, 2], 40);
        let spec = ControlSpec::duration_proportional(1.0, 1.0, 10, 0);
        match controlled_frame_set(&ann, &spec) {
            Err(KfsError::Capacity { requested, achievable, .. }) => {
                assert_eq!((requested, achievable), (10, 5));
            }
            other => panic!("{other:?}"),
        }
        let spec = ControlSpec::duration_proportional(0.5, 1.0, 41, 0);
        assert!(matches!(controlled_frame_set(&ann, &spec), Err(KfsError::Infeasible(_))));
        let spec = ControlSpec::duration_proportional(0.5, 0.0, 10, 0);
        assert!(controlled_frame_set(&ann, &spec).is_err());
    }

    #[test]
    fn overfull_scene_is_clamped() {
        // proportional share of the long scene exceeds the short one's room
        let ann = ann_with(&[2, 40], 200);
        let spec = ControlSpec {
            target_kfr: 1.0,
            target_shr: 1.0,
            concentration: f64::INFINITY,
            beta: 0.0,
            budget: 20,
            seed: 0,
        };
        let out = controlled_frame_set(&ann, &spec).unwrap();
        assert_eq!(out.scene_counts, vec![2, 18]);
        assert_eq!(
            out.clamps,
            vec![ClampEvent {
                scene: 0,
                requested: 10,
                capacity: 2
            }]
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let ann = ann_with(&[10, 30, 20], 300);
        let spec = ControlSpec {
            target_kfr: 0.6,
            target_shr: 0.7,
            concentration: 0.2,
            beta: 0.5,
            budget: 32,
            seed: 99,
        };
        assert_eq!(controlled_frame_set(&ann, &spec).unwrap(), controlled_frame_set(&ann, &spec).unwrap());
    }
}
