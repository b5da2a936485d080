//! Synthetic annotated corpora and a calibrated QA oracle.
//!
//! A synthetic sample is a video of `n` frames with 1–5 scenes, each made
//! of one or more disjoint segments. Frame features are drawn around
//! per-scene centers (all segments of a scene share one) and per-shot
//! background centers; similarity is a noisy baseline plus a bump inside
//! scenes whose height scales with the sample's relevance level.

mod oracle;
mod study;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::random::{choose_without_replacement, derive_seed_index, rng_from_seed, KfsRng};
use crate::timeline::{AnnotationSample, FeatureMatrix, Scene, Segment, SimilarityProfile};

pub use oracle::{oracle_accuracy, OracleModel, TABLE1_AXIS, TABLE1_PUBLISHED};
pub use study::{correlation_study, StudyResult, MIN_STUDY_CONFIGS, MIN_STUDY_SAMPLES};

/// Mean similarity outside scenes.
pub const BASELINE_SIMILARITY: f64 = 0.2;
/// Extra similarity inside scenes at relevance 1.
pub const SCENE_BUMP: f64 = 0.15;
const LAYOUT_ATTEMPTS: usize = 32;
const SHOT_LENGTH: (usize, usize) = (15, 60);

/// Omitted fields take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub min_s: u32,
    pub max_s: u32,
    /// Probabilities of 1, 2, 3, 4 and 5 scenes.
    pub scene_count_probs: [f64; 5],
    /// Sample `i` gets `relevance_levels[i % len]`.
    pub relevance_levels: Vec<f64>,
    /// Range of the fraction of frames inside scenes.
    pub key_fraction: [f64; 2],
    pub max_segments_per_scene: u32,
    pub dim: usize,
    /// Feature noise around cluster centers.
    pub noise: f64,
    pub similarity_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// The study corpus: 300 five-to-fifteen minute videos averaging 2.5
    /// scenes, with short key segments and mixed relevance.
    fn default() -> Self {
        SynthSpec {
            n_samples: 300,
            min_s: 300,
            max_s: 900,
            scene_count_probs: [0.25, 0.3, 0.25, 0.1, 0.1],
            relevance_levels: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            key_fraction: [0.01, 0.06],
            max_segments_per_scene: 2,
            dim: 16,
            noise: 0.35,
            similarity_noise: 0.04,
            seed: 2025,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KfsError::precondition(msg));
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1".into());
        }
        if self.min_s < 30 || self.max_s < self.min_s {
            return bad(format!("duration range [{}, {}] needs 30 <= min_s <= max_s", self.min_s, self.max_s));
        }
        let p = &self.scene_count_probs;
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("scene_count_probs {p:?} must be nonnegative and sum to 1"));
        }
        if self.relevance_levels.is_empty() || self.relevance_levels.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("relevance_levels must be a nonempty list in [0, 1]".into());
        }
        let [lo, hi] = self.key_fraction;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return bad(format!("key_fraction [{lo}, {hi}] must satisfy 0 < lo <= hi <= 0.5"));
        }
        if self.max_segments_per_scene == 0 {
            return bad("max_segments_per_scene must be at least 1".into());
        }
        if self.dim < 2 {
            return bad(format!("dim={} must be at least 2", self.dim));
        }
        for (name, v) in [("noise", self.noise), ("similarity_noise", self.similarity_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name}={v} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn sample_id(&self, index: usize) -> String {
        let width = self.n_samples.saturating_sub(1).to_string().len().max(4);
        format!("synth-{index:0width$}")
    }
}

/// One sample with everything a sampler or the metrics need.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub annotation: AnnotationSample,
    pub similarity: SimilarityProfile,
    pub features: FeatureMatrix,
    /// Relevance level for synthetic samples; unknown for loaded data.
    pub relevance: Option<f64>,
}

impl CorpusItem {
    pub fn id(&self) -> &str {
        self.annotation.id()
    }
}

fn gaussian(rng: &mut KfsRng) -> f64 {
    rng.sample(StandardNormal)
}

/// `parts` positive integers summing to `total`, uniformly among compositions.
fn composition(rng: &mut KfsRng, total: usize, parts: usize) -> Vec<usize> {
    let cuts_pool: Vec<usize> = (1..total).collect();
    let mut cuts = choose_without_replacement(rng, &cuts_pool, parts - 1);
    cuts.sort_unstable();
    cuts.push(total);
    let mut prev = 0;
    cuts.iter()
        .map(|&c| {
            let len = c - prev;
            prev = c;
            len
        })
        .collect()
}

fn draw_layout(rng: &mut KfsRng, spec: &SynthSpec, id: &str, n: usize) -> Result<AnnotationSample> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut m = 5;
    for (i, p) in spec.scene_count_probs.iter().enumerate() {
        acc += p;
        if u < acc {
            m = i + 1;
            break;
        }
    }
    let segs_per_scene: Vec<usize> = (0..m)
        .map(|_| rng.random_range(1..=spec.max_segments_per_scene as usize))
        .collect();
    let n_segments: usize = segs_per_scene.iter().sum();

    let mut last_reason = String::new();
    for _ in 0..LAYOUT_ATTEMPTS {
        let frac = rng.random_range(spec.key_fraction[0]..=spec.key_fraction[1]);
        let key = ((frac * n as f64).round() as usize).max(n_segments);
        // segments need a gap of at least one frame between them
        if key + n_segments - 1 > n {
            last_reason = format!("{n_segments} segments covering {key} frames do not fit in {n} frames");
            continue;
        }
        let lengths = composition(rng, key, n_segments);
        let slack = n - key - (n_segments - 1);
        // stars and bars over the n_segments + 1 gaps, zeros allowed
        let gap_pool: Vec<usize> = (0..slack + n_segments).collect();
        let mut bars = choose_without_replacement(rng, &gap_pool, n_segments);
        bars.sort_unstable();
        let mut owner: Vec<usize> = segs_per_scene
            .iter()
            .enumerate()
            .flat_map(|(scene, &c)| std::iter::repeat_n(scene, c))
            .collect();
        owner.shuffle(rng);

        let mut scenes: Vec<Scene> = (0..m)
            .map(|i| Scene {
                scene_id: i as u32,
                segments: Vec::new(),
            })
            .collect();
        let mut cursor = 0;
        let mut prev_bar = None;
        for (s, (&len, &bar)) in lengths.iter().zip(&bars).enumerate() {
            // distinct bars leave at least the mandatory one-frame gap
            cursor += match prev_bar {
                None => bar,
                Some(p) => bar - p,
            };
            prev_bar = Some(bar);
            scenes[owner[s]].segments.push(Segment {
                segment_id: s as u32,
                start: cursor as u32,
                end: (cursor + len) as u32,
            });
            cursor += len;
        }
        match AnnotationSample::new(id, n as u32, scenes) {
            Ok(ann) => return Ok(ann),
            Err(e) => last_reason = e.to_string(),
        }
    }
    Err(KfsError::Layout {
        sample: id.to_string(),
        reason: last_reason,
    })
}

fn draw_center(rng: &mut KfsRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| gaussian(rng)).collect()
}

fn draw_features(rng: &mut KfsRng, spec: &SynthSpec, ann: &AnnotationSample) -> Result<FeatureMatrix> {
    let n = ann.n_frames();
    let scene_centers: Vec<Vec<f64>> = (0..ann.scene_count()).map(|_| draw_center(rng, spec.dim)).collect();
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut shot_center = draw_center(rng, spec.dim);
    let mut shot_left = rng.random_range(SHOT_LENGTH.0..=SHOT_LENGTH.1);
    for frame in 0..n {
        let center = match ann.scene_of(frame) {
            Some(scene) => &scene_centers[scene],
            None => {
                if shot_left == 0 {
                    shot_center = draw_center(rng, spec.dim);
                    shot_left = rng.random_range(SHOT_LENGTH.0..=SHOT_LENGTH.1);
                }
                shot_left -= 1;
                &shot_center
            }
        };
        for &c in center {
            data.push((c + spec.noise * gaussian(rng)) as f32);
        }
    }
    FeatureMatrix::new(n, spec.dim, data)
}

fn draw_similarity(rng: &mut KfsRng, spec: &SynthSpec, ann: &AnnotationSample, relevance: f64) -> Result<SimilarityProfile> {
    let mask = ann.key_mask();
    let scores = mask
        .iter()
        .map(|&key| {
            let bump = if key { relevance * SCENE_BUMP } else { 0.0 };
            BASELINE_SIMILARITY + bump + spec.similarity_noise * gaussian(rng)
        })
        .collect();
    SimilarityProfile::new(scores)
}

fn synth_item(spec: &SynthSpec, index: usize) -> Result<CorpusItem> {
    let id = spec.sample_id(index);
    let mut rng = rng_from_seed(derive_seed_index(spec.seed, index as u64));
    let n = rng.random_range(spec.min_s..=spec.max_s) as usize;
    let relevance = spec.relevance_levels[index % spec.relevance_levels.len()];
    let annotation = draw_layout(&mut rng, spec, &id, n)?;
    let features = draw_features(&mut rng, spec, &annotation)?;
    let similarity = draw_similarity(&mut rng, spec, &annotation, relevance)?;
    Ok(CorpusItem {
        annotation,
        similarity,
        features,
        relevance: Some(relevance),
    })
}

/// Generates the corpus; sample `i` depends only on `(spec, i)`.
pub fn synth_corpus(spec: &SynthSpec) -> Result<Vec<CorpusItem>> {
    spec.validate()?;
    (0..spec.n_samples)
        .into_par_iter()
        .map(|i| synth_item(spec, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_samples: usize) -> SynthSpec {
        SynthSpec {
            n_samples,
            min_s: 60,
            max_s: 200,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SynthSpec::default().validate().is_ok());
        let mut s = small(3);
        s.min_s = 20;
        assert!(s.validate().is_err());
        let mut s = small(3);
        s.scene_count_probs = [0.5, 0.5, 0.5, 0.0, 0.0];
        assert!(s.validate().is_err());
        let mut s = small(3);
        s.dim = 1;
        assert!(s.validate().is_err());
        let json = r#"{"n_samples":2,"min_s":30,"max_s":40,"scene_count_probs":[1,0,0,0,0],
            "relevance_levels":[1],"dim":4,"noise":0.1,"seed":1}"#;
        let s: SynthSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.key_fraction, SynthSpec::default().key_fraction);
        let s: SynthSpec = serde_json::from_str(r#"{"n_samples":7,"seed":3}"#).unwrap();
        assert_eq!((s.n_samples, s.seed, s.max_s), (7, 3, SynthSpec::default().max_s));
        assert!(serde_json::from_str::<SynthSpec>(&json.replace("\"seed\"", "\"sed\"")).is_err());
    }

    #[test]
    fn default_mean_scene_count_is_two_and_a_half() {
        let p = SynthSpec::default().scene_count_probs;
        let mean: f64 = p.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
        assert!((mean - 2.5).abs() < 1e-12);
    }

    #[test]
    fn point_mass_gives_single_scene() {
        let mut spec = small(40);
        spec.scene_count_probs = [1.0, 0.0, 0.0, 0.0, 0.0];
        for item in synth_corpus(&spec).unwrap() {
            assert_eq!(item.annotation.scene_count(), 1);
        }
    }

    #[test]
    fn generated_samples_are_consistent() {
        let spec = small(60);
        let corpus = synth_corpus(&spec).unwrap();
        assert_eq!(corpus.len(), 60);
        for (i, item) in corpus.iter().enumerate() {
            let ann = &item.annotation;
            assert_eq!(item.id(), spec.sample_id(i));
            assert!((60..=200).contains(&ann.duration_s()));
            assert!((1..=5).contains(&ann.scene_count()));
            assert_eq!(item.similarity.len(), ann.n_frames());
            assert_eq!(item.features.n_frames(), ann.n_frames());
            assert_eq!(item.features.dim(), spec.dim);
            // round-trips through the validating constructor
            let again = AnnotationSample::new(ann.id(), ann.duration_s(), ann.scenes().to_vec()).unwrap();
            assert_eq!(&again, ann);
        }
    }

    #[test]
    fn deterministic_and_index_local() {
        let a = synth_corpus(&small(12)).unwrap();
        let b = synth_corpus(&small(12)).unwrap();
        assert_eq!(a, b);
        let c = synth_corpus(&small(5)).unwrap();
        assert_eq!(&a[..5], &c[..]);
        let mut other = small(12);
        other.seed += 1;
        assert_ne!(synth_corpus(&other).unwrap(), a);
    }

    #[test]
    fn zero_relevance_has_no_scene_signal() {
        let mut spec = small(200);
        spec.relevance_levels = vec![0.0];
        let (mut inside, mut outside) = ((0.0, 0usize), (0.0, 0usize));
        for item in synth_corpus(&spec).unwrap() {
            let mask = item.annotation.key_mask();
            for (s, key) in item.similarity.scores().iter().zip(mask) {
                let acc = if key { &mut inside } else { &mut outside };
                acc.0 += s;
                acc.1 += 1;
            }
        }
        let diff = inside.0 / inside.1 as f64 - outside.0 / outside.1 as f64;
        assert!(diff.abs() < 0.01, "{diff}");
    }

    #[test]
    fn full_relevance_raises_scene_similarity() {
        let mut spec = small(20);
        spec.relevance_levels = vec![1.0];
        for item in synth_corpus(&spec).unwrap() {
            let mask = item.annotation.key_mask();
            let mean = |key: bool| {
                let v: Vec<f64> = item.similarity.scores().iter().zip(&mask).filter(|p| *p.1 == key).map(|p| *p.0).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            assert!(mean(true) - mean(false) > 0.1);
        }
    }

    #[test]
    fn impossible_layout_is_reported() {
        let mut spec = small(1);
        spec.min_s = 30;
        spec.max_s = 30;
        spec.scene_count_probs = [0.0, 0.0, 0.0, 0.0, 1.0];
        spec.max_segments_per_scene = 8;
        spec.key_fraction = [0.5, 0.5];
        // with 5 scenes of up to 8 segments, most draws cannot fit 30 frames
        let results: Vec<_> = (0..20)
            .map(|seed| synth_corpus(&SynthSpec { seed, ..spec.clone() }))
            .collect();
        assert!(results.iter().any(|r| matches!(r, Err(KfsError::Layout { .. }))));
    }
}
