//! Shared domain types.
//!
//! Videos are sampled at 1 fps: frame index `i` (0-based) is the frame at
//! `t = i` seconds and covers the second `[i, i + 1)`. Annotated segments are
//! half-open `[start, end)` in whole seconds, so frame `i` lies in a segment
//! iff `start <= i < end`.

use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};

/// Half-open `[start, end)` interval of whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub segment_id: u32,
    pub start: u32,
    pub end: u32,
}

impl Segment {
    pub fn len(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start as usize) <= frame && frame < self.end as usize
    }

    fn overlaps(&self, other: &Segment) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// A group of disjoint segments that carry the same key information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: u32,
    pub segments: Vec<Segment>,
}

impl Scene {
    /// Scene duration in seconds, the sum of its segment lengths.
    pub fn duration(&self) -> u32 {
        self.segments.iter().map(Segment::len).sum()
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.segments.iter().any(|s| s.contains(frame))
    }

    /// All frame indices covered by this scene, ascending.
    pub fn frames(&self) -> Vec<usize> {
        let mut segs = self.segments.clone();
        segs.sort_by_key(|s| s.start);
        segs.iter()
            .flat_map(|s| s.start as usize..s.end as usize)
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawAnnotationSample {
    id: String,
    duration_s: u32,
    #[serde(default)]
    scenes: Vec<Scene>,
}

/// Ground-truth annotation for one (video, question) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotationSample")]
pub struct AnnotationSample {
    id: String,
    duration_s: u32,
    scenes: Vec<Scene>,
}

impl TryFrom<RawAnnotationSample> for AnnotationSample {
    type Error = KfsError;

    fn try_from(raw: RawAnnotationSample) -> Result<Self> {
        AnnotationSample::new(raw.id, raw.duration_s, raw.scenes)
    }
}

impl AnnotationSample {
    pub fn new(id: impl Into<String>, duration_s: u32, scenes: Vec<Scene>) -> Result<Self> {
        let sample = AnnotationSample {
            id: id.into(),
            duration_s,
            scenes,
        };
        sample.validate()?;
        Ok(sample)
    }

    fn violation(&self, field: impl Into<String>, reason: impl Into<String>) -> KfsError {
        KfsError::Annotation {
            sample: self.id.clone(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.duration_s == 0 {
            return Err(self.violation("duration_s", "duration must be positive"));
        }
        let mut scene_ids: Vec<u32> = self.scenes.iter().map(|s| s.scene_id).collect();
        scene_ids.sort_unstable();
        if let Some(w) = scene_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(self.violation("scene_id", format!("duplicate scene id {}", w[0])));
        }

        let mut all: Vec<(u32, &Segment)> = Vec::new();
        for scene in &self.scenes {
            let field = format!("scenes[{}]", scene.scene_id);
            if scene.segments.is_empty() {
                return Err(self.violation(field, "scene has no segments"));
            }
            for seg in &scene.segments {
                if seg.start >= seg.end {
                    return Err(self.violation(
                        format!("{field}.segments[{}]", seg.segment_id),
                        format!("empty or inverted interval [{}, {})", seg.start, seg.end),
                    ));
                }
                if seg.end > self.duration_s {
                    return Err(self.violation(
                        format!("{field}.segments[{}]", seg.segment_id),
                        format!("end {} exceeds duration {}", seg.end, self.duration_s),
                    ));
                }
                all.push((scene.scene_id, seg));
            }
        }

        let mut seg_ids: Vec<u32> = all.iter().map(|(_, s)| s.segment_id).collect();
        seg_ids.sort_unstable();
        if let Some(w) = seg_ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(self.violation("segment_id", format!("duplicate segment id {}", w[0])));
        }

        all.sort_by_key(|(_, s)| (s.start, s.end));
        for pair in all.windows(2) {
            let (scene_a, a) = pair[0];
            let (scene_b, b) = pair[1];
            if a.overlaps(b) {
                return Err(self.violation(
                    "segments",
                    format!(
                        "segment {} [{}, {}) of scene {} overlaps segment {} [{}, {}) of scene {}",
                        a.segment_id, a.start, a.end, scene_a, b.segment_id, b.start, b.end, scene_b
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn duration_s(&self) -> u32 {
        self.duration_s
    }

    /// Number of frames at 1 fps.
    pub fn n_frames(&self) -> usize {
        self.duration_s as usize
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    /// Number of relevant scenes `m`.
    pub fn scene_count(&self) -> usize {
        self.scenes.len()
    }

    pub fn scene_durations(&self) -> Vec<u32> {
        self.scenes.iter().map(Scene::duration).collect()
    }

    /// Number of key frames `|K|`.
    pub fn key_frame_count(&self) -> usize {
        self.scenes.iter().map(|s| s.duration() as usize).sum()
    }

    /// Index of the scene containing `frame`, if any.
    pub fn scene_of(&self, frame: usize) -> Option<usize> {
        self.scenes.iter().position(|s| s.contains(frame))
    }

    /// Per-frame key mask of length `n_frames`.
    pub fn key_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_frames()];
        for seg in self.scenes.iter().flat_map(|s| &s.segments) {
            mask[seg.start as usize..seg.end as usize].fill(true);
        }
        mask
    }
}

/// Whether `frame` lies inside any annotated segment.
pub fn frame_in_key(frame: usize, ann: &AnnotationSample) -> Result<bool> {
    if frame >= ann.n_frames() {
        return Err(KfsError::FrameOutOfRange {
            frame,
            n_frames: ann.n_frames(),
        });
    }
    Ok(ann.scene_of(frame).is_some())
}

/// `|T_i|` for every scene, zeros included.
pub fn per_scene_counts(frames: &SampleSet, ann: &AnnotationSample) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; ann.scene_count()];
    for &f in frames.frames() {
        if f >= ann.n_frames() {
            return Err(KfsError::FrameOutOfRange {
                frame: f,
                n_frames: ann.n_frames(),
            });
        }
        if let Some(i) = ann.scene_of(f) {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Sorted, duplicate-free set of sampled frame indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    frames: Vec<usize>,
    budget: usize,
}

impl SampleSet {
    /// Validates `frames` against a video of `n_frames` frames.
    pub fn new(frames: Vec<usize>, budget: usize, n_frames: usize) -> Result<Self> {
        if budget == 0 {
            return Err(KfsError::precondition("budget must be at least 1"));
        }
        if frames.is_empty() {
            return Err(KfsError::precondition("sample set is empty"));
        }
        if frames.len() > budget.min(n_frames) {
            return Err(KfsError::precondition(format!(
                "{} frames exceed min(budget {budget}, n_frames {n_frames})",
                frames.len()
            )));
        }
        if let Some(w) = frames.windows(2).find(|w| w[0] >= w[1]) {
            return Err(KfsError::precondition(format!(
                "frames not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if let Some(&last) = frames.last() {
            if last >= n_frames {
                return Err(KfsError::FrameOutOfRange {
                    frame: last,
                    n_frames,
                });
            }
        }
        Ok(SampleSet { frames, budget })
    }

    /// Sorts and de-duplicates before validating.
    pub fn from_unsorted(mut frames: Vec<usize>, budget: usize, n_frames: usize) -> Result<Self> {
        frames.sort_unstable();
        frames.dedup();
        SampleSet::new(frames, budget, n_frames)
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-frame question–frame similarity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityProfile {
    scores: Vec<f64>,
}

impl SimilarityProfile {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(KfsError::precondition("similarity profile is empty"));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(KfsError::precondition(format!(
                "similarity score at frame {i} is not finite"
            )));
        }
        Ok(SimilarityProfile { scores })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Row-major `n_frames x dim` matrix of per-frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_frames: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(n_frames: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(KfsError::precondition("feature dim must be at least 1"));
        }
        if data.len() != n_frames * dim {
            return Err(KfsError::precondition(format!(
                "feature data has {} values, expected {n_frames} x {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(KfsError::precondition(format!(
                "feature value at row {}, col {} is not finite",
                i / dim,
                i % dim
            )));
        }
        Ok(FeatureMatrix {
            n_frames,
            dim,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Nondecreasing cumulative distribution over frame indices ending at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingCdf {
    values: Vec<f64>,
}

impl SamplingCdf {
    pub const END_TOLERANCE: f64 = 1e-9;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        let Some(&last) = values.last() else {
            return Err(KfsError::precondition("cdf is empty"));
        };
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KfsError::precondition("cdf has negative or non-finite values"));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(KfsError::precondition(format!(
                "cdf decreases between {i} and {}",
                i + 1
            )));
        }
        if (last - 1.0).abs() > Self::END_TOLERANCE {
            return Err(KfsError::precondition(format!("cdf ends at {last}, not 1")));
        }
        Ok(SamplingCdf { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
