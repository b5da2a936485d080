//! Sampling-quality metrics: KFR, SHR, BSR, BDS, the per-sample score and
//! the UKSS aggregate, plus Spearman rank correlation.

use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::timeline::{per_scene_counts, AnnotationSample, SampleSet};

/// Default truncation floor for per-sample scores.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Exponents tried by BDS: `0.0, 0.1, ..., 1.0`.
pub const BDS_BETA_STEPS: usize = 10;

pub fn bds_beta_grid() -> impl Iterator<Item = f64> {
    (0..=BDS_BETA_STEPS).map(|i| i as f64 / BDS_BETA_STEPS as f64)
}

/// Fraction of sampled frames that are key frames.
pub fn key_frame_rate(frames: &SampleSet, ann: &AnnotationSample) -> Result<f64> {
    if frames.is_empty() {
        return Err(KfsError::precondition("KFR needs at least one sampled frame"));
    }
    let hits = frames
        .frames()
        .iter()
        .filter(|&&f| ann.scene_of(f).is_some())
        .count();
    Ok(hits as f64 / frames.len() as f64)
}

fn require_scenes(metric: &'static str, m: usize) -> Result<()> {
    if m == 0 {
        return Err(KfsError::UndefinedMetric {
            metric,
            reason: "sample has no annotated scenes".into(),
        });
    }
    Ok(())
}

pub fn scene_hit_rate_from_counts(counts: &[usize]) -> Result<f64> {
    require_scenes("SHR", counts.len())?;
    let hit = counts.iter().filter(|&&c| c >= 1).count();
    Ok(hit as f64 / counts.len() as f64)
}

/// Fraction of scenes with at least one sampled frame.
pub fn scene_hit_rate(frames: &SampleSet, ann: &AnnotationSample) -> Result<f64> {
    scene_hit_rate_from_counts(&per_scene_counts(frames, ann)?)
}

/// Per-scene coverage thresholds
/// `max(1, floor(total * min(l_i / sum(l), 1 / m)))`.
///
/// Evaluated in integer arithmetic: the floor of a minimum of two
/// nonnegative rationals is the minimum of their floors.
pub fn scene_thresholds(counts: &[usize], durations: &[u32]) -> Result<Vec<usize>> {
    let m = counts.len();
    if m == 0 {
        return Err(KfsError::precondition("scene_thresholds needs m >= 1"));
    }
    if durations.len() != m {
        return Err(KfsError::precondition(format!(
            "{m} counts but {} durations",
            durations.len()
        )));
    }
    if durations.contains(&0) {
        return Err(KfsError::precondition("scene durations must be >= 1"));
    }
    let total = counts.iter().sum::<usize>() as u64;
    let total_len: u64 = durations.iter().map(|&l| l as u64).sum();
    Ok(durations
        .iter()
        .map(|&l| {
            let by_duration = total * l as u64 / total_len;
            let uniform = total / m as u64;
            by_duration.min(uniform).max(1) as usize
        })
        .collect())
}

pub fn balanced_scene_recall_from_counts(counts: &[usize], durations: &[u32]) -> Result<f64> {
    require_scenes("BSR", counts.len())?;
    let theta = scene_thresholds(counts, durations)?;
    let met = counts.iter().zip(&theta).filter(|(c, t)| c >= t).count();
    Ok(met as f64 / counts.len() as f64)
}

/// Fraction of scenes whose sample count reaches its threshold.
pub fn balanced_scene_recall(frames: &SampleSet, ann: &AnnotationSample) -> Result<f64> {
    balanced_scene_recall_from_counts(&per_scene_counts(frames, ann)?, &ann.scene_durations())
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Maximum cosine similarity between the in-scene sample distribution and
/// the duration-power distributions `l^beta`, `beta` on the 11-point grid.
///
/// Returns 0 when no sampled frame lies in any scene and exactly 1 when
/// there is a single scene.
pub fn balanced_distribution_similarity_from_counts(
    counts: &[usize],
    durations: &[u32],
) -> Result<f64> {
    let m = counts.len();
    require_scenes("BDS", m)?;
    if durations.len() != m {
        return Err(KfsError::precondition(format!(
            "{m} counts but {} durations",
            durations.len()
        )));
    }
    let total = counts.iter().sum::<usize>();
    if total == 0 {
        return Ok(0.0);
    }
    if m == 1 {
        return Ok(1.0);
    }
    let sample: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let best = bds_beta_grid()
        .map(|beta| {
            let weights: Vec<f64> = durations.iter().map(|&l| (l as f64).powf(beta)).collect();
            let sum: f64 = weights.iter().sum();
            let ideal: Vec<f64> = weights.iter().map(|w| w / sum).collect();
            cosine(&sample, &ideal)
        })
        .fold(0.0_f64, f64::max);
    Ok(best.clamp(0.0, 1.0))
}

pub fn balanced_distribution_similarity(frames: &SampleSet, ann: &AnnotationSample) -> Result<f64> {
    balanced_distribution_similarity_from_counts(
        &per_scene_counts(frames, ann)?,
        &ann.scene_durations(),
    )
}

/// Geometric mean of KFR, BSR and BDS.
pub fn sample_score(kfr: f64, bsr: f64, bds: f64) -> Result<f64> {
    for (name, v) in [("kfr", kfr), ("bsr", bsr), ("bds", bds)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(KfsError::precondition(format!("{name}={v} outside [0, 1]")));
        }
    }
    if kfr == 0.0 || bsr == 0.0 || bds == 0.0 {
        return Ok(0.0);
    }
    Ok((kfr * bsr * bds).cbrt())
}

/// Geometric mean of `max(epsilon, score)` over samples, in log space.
pub fn ukss(scores: &[f64], epsilon: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(KfsError::precondition("UKSS needs at least one sample"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(KfsError::precondition(format!("epsilon={epsilon} outside (0, 1)")));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(KfsError::precondition(format!("score {s} outside [0, 1]")));
    }
    let mean_log =
        scores.iter().map(|&s| s.max(epsilon).ln()).sum::<f64>() / scores.len() as f64;
    Ok(mean_log.exp().clamp(epsilon, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub kfr: f64,
    pub shr: f64,
    pub bsr: f64,
    pub bds: f64,
    pub score: f64,
}

impl SampleMetrics {
    /// All metrics of one sampled set against its annotation.
    pub fn evaluate(frames: &SampleSet, ann: &AnnotationSample) -> Result<Self> {
        let counts = per_scene_counts(frames, ann)?;
        let durations = ann.scene_durations();
        let kfr = key_frame_rate(frames, ann)?;
        let shr = scene_hit_rate_from_counts(&counts)?;
        let bsr = balanced_scene_recall_from_counts(&counts, &durations)?;
        let bds = balanced_distribution_similarity_from_counts(&counts, &durations)?;
        let score = sample_score(kfr, bsr, bds)?;
        Ok(SampleMetrics {
            kfr,
            shr,
            bsr,
            bds,
            score,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    #[serde(flatten)]
    pub metrics: SampleMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub kfr: f64,
    pub shr: f64,
    pub bsr: f64,
    pub bds: f64,
    pub score: f64,
}

/// Per-sample metrics and their UKSS aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UkssReport {
    pub per_sample: Vec<SampleRecord>,
    pub ukss: f64,
    pub epsilon: f64,
}

impl UkssReport {
    pub fn new(per_sample: Vec<SampleRecord>, epsilon: f64) -> Result<Self> {
        let scores: Vec<f64> = per_sample.iter().map(|r| r.metrics.score).collect();
        let ukss = ukss(&scores, epsilon)?;
        Ok(UkssReport {
            per_sample,
            ukss,
            epsilon,
        })
    }

    /// Scores `(id, frames, annotation)` triples in order.
    pub fn evaluate<'a, I>(items: I, epsilon: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a SampleSet, &'a AnnotationSample)>,
    {
        let per_sample = items
            .into_iter()
            .map(|(t, ann)| {
                SampleMetrics::evaluate(t, ann)
                    .map(|metrics| SampleRecord {
                        id: ann.id().to_string(),
                        metrics,
                    })
                    .map_err(|e| e.in_sample(ann.id()))
            })
            .collect::<Result<Vec<_>>>()?;
        UkssReport::new(per_sample, epsilon)
    }

    pub fn n(&self) -> usize {
        self.per_sample.len()
    }

    pub fn means(&self) -> MetricMeans {
        let n = self.per_sample.len().max(1) as f64;
        let sum = |f: fn(&SampleMetrics) -> f64| {
            self.per_sample.iter().map(|r| f(&r.metrics)).sum::<f64>() / n
        };
        MetricMeans {
            kfr: sum(|m| m.kfr),
            shr: sum(|m| m.shr),
            bsr: sum(|m| m.bsr),
            bds: sum(|m| m.bds),
            score: sum(|m| m.score),
        }
    }
}

/// Ranks starting at 1, ties receive the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1..=j)
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average-tie ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(KfsError::UndefinedCorrelation(format!(
            "length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(KfsError::UndefinedCorrelation(format!(
            "need at least 3 pairs, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(KfsError::UndefinedCorrelation("NaN input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| KfsError::UndefinedCorrelation("zero rank variance".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::{Scene, Segment};
    use proptest::prelude::*;

    fn scenes_a_b() -> AnnotationSample {
        let sc = |id, s, e| Scene {
            scene_id: id,
            segments: vec![Segment {
                segment_id: id,
                start: s,
                end: e,
            }],
        };
        AnnotationSample::new("ab", 200, vec![sc(0, 0, 10), sc(1, 100, 130)]).unwrap()
    }

    fn set(frames: &[usize]) -> SampleSet {
        SampleSet::new(frames.to_vec(), 64, 200).unwrap()
    }

    /// Exhaustive cosine over the grid, computed on unnormalized vectors.
    fn bds_oracle(counts: &[usize], durations: &[u32]) -> f64 {
        let mut best = f64::MIN;
        for step in 0..=10 {
            let beta = step as f64 * 0.1;
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for (c, l) in counts.iter().zip(durations) {
                let a = *c as f64;
                let b = (*l as f64).powf(beta);
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            best = best.max(dot / (na.sqrt() * nb.sqrt()));
        }
        best
    }

    /// Rank by counting smaller and equal values.
    fn rank_oracle(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|x| {
                let less = v.iter().filter(|y| *y < x).count() as f64;
                let eq = v.iter().filter(|y| *y == x).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    }

    fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
        let (rx, ry) = (rank_oracle(x), rank_oracle(y));
        let n = x.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn kfr_examples() {
        let ann = AnnotationSample::new(
            "k",
            30,
            vec![Scene {
                scene_id: 0,
                segments: vec![Segment {
                    segment_id: 0,
                    start: 8,
                    end: 16,
                }],
            }],
        )
        .unwrap();
        let t = SampleSet::new(vec![5, 10, 15, 20], 4, 30).unwrap();
        assert_eq!(key_frame_rate(&t, &ann).unwrap(), 0.5);
        let t = SampleSet::new(vec![8, 9, 15], 4, 30).unwrap();
        assert_eq!(key_frame_rate(&t, &ann).unwrap(), 1.0);
        let t = SampleSet::new(vec![0, 16, 29], 4, 30).unwrap();
        assert_eq!(key_frame_rate(&t, &ann).unwrap(), 0.0);
    }

    #[test]
    fn shr_examples() {
        assert_eq!(scene_hit_rate_from_counts(&[1, 3]).unwrap(), 1.0);
        assert_eq!(scene_hit_rate_from_counts(&[0, 3]).unwrap(), 0.5);
        assert_eq!(scene_hit_rate_from_counts(&[0, 0]).unwrap(), 0.0);
        assert!(matches!(
            scene_hit_rate_from_counts(&[]),
            Err(KfsError::UndefinedMetric { .. })
        ));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(scene_thresholds(&[1, 3], &[10, 30]).unwrap(), vec![1, 2]);
        assert_eq!(scene_thresholds(&[0, 0, 0], &[5, 9, 2]).unwrap(), vec![1, 1, 1]);
        assert_eq!(scene_thresholds(&[7], &[40]).unwrap(), vec![7]);
    }

    #[test]
    fn bsr_examples() {
        let ann = scenes_a_b();
        assert_eq!(balanced_scene_recall(&set(&[2, 105, 110, 120]), &ann).unwrap(), 1.0);
        assert_eq!(balanced_scene_recall(&set(&[2, 3, 4, 105]), &ann).unwrap(), 0.5);
        assert_eq!(balanced_scene_recall(&set(&[50]), &ann).unwrap(), 0.0);
    }

    #[test]
    fn bds_examples() {
        assert!((balanced_distribution_similarity_from_counts(&[2, 2], &[10, 10]).unwrap() - 1.0).abs() < 1e-12);
        let v = balanced_distribution_similarity_from_counts(&[1, 3], &[10, 30]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = balanced_distribution_similarity_from_counts(&[3, 1], &[10, 30]).unwrap();
        assert!((v - bds_oracle(&[3, 1], &[10, 30])).abs() < 1e-12);
        // cos((0.75, 0.25), (0.5, 0.5)) = 2 / sqrt(5)
        assert!((v - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(balanced_distribution_similarity_from_counts(&[0, 0], &[3, 4]).unwrap(), 0.0);
        assert_eq!(balanced_distribution_similarity_from_counts(&[5], &[4]).unwrap(), 1.0);
    }

    #[test]
    fn score_and_ukss_examples() {
        assert_eq!(sample_score(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(sample_score(0.0, 0.7, 0.2).unwrap(), 0.0);
        assert!((sample_score(0.5, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((ukss(&[0.04, 0.0001], 0.01).unwrap() - 0.02).abs() < 1e-12);
        assert_eq!(ukss(&[1.0, 1.0, 1.0], 0.01).unwrap(), 1.0);
        assert!((ukss(&[0.0, 0.0], 0.01).unwrap() - 0.01).abs() < 1e-15);
        assert!(ukss(&[], 0.01).is_err());
        assert!(ukss(&[0.5], 0.0).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman_rho(&[1., 2., 3.], &[10., 20., 30.]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-12);
        let x = [1., 2., 2., 4.];
        let y = [1., 3., 2., 4.];
        let expected = spearman_oracle(&x, &y);
        assert!((spearman_rho(&x, &y).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(
            spearman_rho(&[1., 1., 1.], &[1., 2., 3.]),
            Err(KfsError::UndefinedCorrelation(_))
        ));
        assert!(spearman_rho(&[1., 2.], &[1., 2.]).is_err());
    }

    #[test]
    fn report_means() {
        let ann = scenes_a_b();
        let t1 = set(&[2, 105, 110, 120]);
        let t2 = set(&[50]);
        let report = UkssReport::evaluate([(&t1, &ann), (&t2, &ann)], DEFAULT_EPSILON).unwrap();
        assert_eq!(report.n(), 2);
        assert_eq!(report.per_sample[1].metrics.score, 0.0);
        assert!((report.means().kfr - 0.5).abs() < 1e-15);
        assert!((report.ukss - (report.per_sample[0].metrics.score * 0.01).sqrt()).abs() < 1e-12);
    }

    fn counts_and_durations() -> impl Strategy<Value = (Vec<usize>, Vec<u32>)> {
        (1usize..7).prop_flat_map(|m| {
            (
                proptest::collection::vec(0usize..20, m),
                proptest::collection::vec(1u32..200, m),
            )
        })
    }

    proptest! {
        #[test]
        fn bds_matches_grid_oracle((counts, durations) in counts_and_durations()) {
            let v = balanced_distribution_similarity_from_counts(&counts, &durations).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            if counts.iter().sum::<usize>() > 0 {
                let o = bds_oracle(&counts, &durations).min(1.0);
                prop_assert!((v - o).abs() < 1e-12, "{v} vs {o}");
            }
        }

        #[test]
        fn bds_permutation_invariant((counts, durations) in counts_and_durations(), rot in 0usize..7) {
            let m = counts.len();
            let r = rot % m;
            let mut c2 = counts.clone();
            let mut d2 = durations.clone();
            c2.rotate_left(r);
            d2.rotate_left(r);
            let a = balanced_distribution_similarity_from_counts(&counts, &durations).unwrap();
            let b = balanced_distribution_similarity_from_counts(&c2, &d2).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn bsr_never_exceeds_shr((counts, durations) in counts_and_durations()) {
            let bsr = balanced_scene_recall_from_counts(&counts, &durations).unwrap();
            let shr = scene_hit_rate_from_counts(&counts).unwrap();
            prop_assert!(bsr <= shr);
        }

        #[test]
        fn bds_is_one_for_proportional_counts(durations in proptest::collection::vec(1u32..50, 1..6), scale in 1usize..4) {
            let counts: Vec<usize> = durations.iter().map(|&l| l as usize * scale).collect();
            let v = balanced_distribution_similarity_from_counts(&counts, &durations).unwrap();
            prop_assert!((v - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ukss_properties(scores in proptest::collection::vec(0.0f64..=1.0, 1..40), eps in 0.001f64..0.5) {
            let u = ukss(&scores, eps).unwrap();
            prop_assert!(u >= eps && u <= 1.0);
            let mut rev = scores.clone();
            rev.reverse();
            prop_assert!((ukss(&rev, eps).unwrap() - u).abs() < 1e-12);
            prop_assert!(ukss(&scores, (eps * 1.5).min(0.99)).unwrap() >= u - 1e-15);
        }

        #[test]
        fn spearman_monotone_invariance(x in proptest::collection::vec(-100.0f64..100.0, 3..30), seed in 0u64..1000) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| ((i as u64 * 7919 + seed) % 13) as f64 + v * 0.1).collect();
            if let Ok(r) = spearman_rho(&x, &y) {
                let xt: Vec<f64> = x.iter().map(|v| (v / 50.0).exp()).collect();
                prop_assert!((spearman_rho(&xt, &y).unwrap() - r).abs() < 1e-9);
                prop_assert!((r - spearman_oracle(&x, &y)).abs() < 1e-9);
            }
        }
    }
}
