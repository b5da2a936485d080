//! Frame-selection strategies.
//!
//! Every sampler returns `min(k, n)` distinct, sorted, in-range frame
//! indices and is deterministic given its inputs and seed.

mod ascs;
mod icf;
mod inverse;
mod its;
mod qvrs;

use std::collections::hash_map::{Entry, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::random::derive_seed;
use crate::timeline::{FeatureMatrix, SampleSet, SamplingCdf, SimilarityProfile};

pub use ascs::{
    ascs_sample, ascs_sample_detailed, ascs_sample_with_icf, ascs_sample_with_qvrs, balanced_cdf, AscsOutcome,
};
pub use icf::{icf_cdf, icf_distribution, icf_sample};
pub use inverse::{build_cdf, inverse_transform_sample, QUANTILE_TOLERANCE};
pub use its::{its_cdf, its_normalize, its_sample};
pub use qvrs::{
    mad_normalize, mass_bin_entropy, qvrs, qvrs_breakdown, shortest_coverage_window,
    softmax_distribution, temporal_bin_entropy, QvrsBreakdown, COVERAGE_TOLERANCE,
};

/// ITS exponent used for VideoMME-style data.
pub const DEFAULT_ALPHA: f64 = 2.0;
/// ITS exponent used for LongVideoBench-style data.
pub const LONG_VIDEO_ALPHA: f64 = 7.0;
pub const DEFAULT_TAU: f64 = 0.3;
pub const DEFAULT_GAMMA: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Uniform,
    Topk,
    Its,
    Icf,
    Ascs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::Topk => "topk",
            Method::Its => "its",
            Method::Icf => "icf",
            Method::Ascs => "ascs",
        }
    }

    pub fn needs_similarity(self) -> bool {
        matches!(self, Method::Topk | Method::Its | Method::Ascs)
    }

    pub fn needs_features(self) -> bool {
        matches!(self, Method::Icf | Method::Ascs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = KfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Method::Uniform),
            "topk" => Ok(Method::Topk),
            "its" => Ok(Method::Its),
            "icf" => Ok(Method::Icf),
            "ascs" => Ok(Method::Ascs),
            other => Err(KfsError::precondition(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    pub budget: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl SamplerConfig {
    pub fn new(method: Method, budget: usize) -> Self {
        SamplerConfig {
            method,
            budget,
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            gamma: DEFAULT_GAMMA,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(KfsError::precondition("budget must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(KfsError::precondition(format!("alpha={} must be > 0", self.alpha)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(KfsError::precondition(format!("tau={} must be > 0", self.tau)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(KfsError::precondition(format!(
                "gamma={} must lie in (0, 1)",
                self.gamma
            )));
        }
        Ok(())
    }

    /// The same configuration with a seed specific to `sample_id`.
    pub fn for_sample(&self, sample_id: &str) -> Self {
        SamplerConfig {
            seed: derive_seed(self.seed, sample_id),
            ..*self
        }
    }
}

/// Probability mass over frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDistribution {
    probs: Vec<f64>,
}

impl FrameDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(KfsError::precondition("distribution is empty"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(KfsError::precondition("distribution has negative or non-finite mass"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(KfsError::precondition(format!("distribution sums to {sum}")));
        }
        Ok(FrameDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Every frame, for budgets that cover the whole video (`k >= n`).
pub(crate) fn all_frames(n_frames: usize, k: usize) -> Result<SampleSet> {
    SampleSet::new((0..n_frames).collect(), k, n_frames)
}

/// Midpoints of `k` equal temporal strata.
pub fn uniform_sample(n_frames: usize, k: usize) -> Result<SampleSet> {
    if n_frames == 0 || k == 0 {
        return Err(KfsError::precondition("uniform sampling needs n >= 1 and k >= 1"));
    }
    if k >= n_frames {
        return all_frames(n_frames, k);
    }
    let frames: Vec<usize> = (0..k)
        .map(|j| ((2 * j + 1) * n_frames) / (2 * k))
        .collect();
    SampleSet::from_unsorted(frames, k, n_frames)
}

/// The `k` highest-similarity frames, ties to the smaller index.
pub fn topk_sample(similarity: &SimilarityProfile, k: usize) -> Result<SampleSet> {
    if k == 0 {
        return Err(KfsError::precondition("k must be at least 1"));
    }
    let s = similarity.scores();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    order.truncate(k);
    SampleSet::from_unsorted(order, k, s.len())
}

/// Inputs a sampler may draw on for one sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleInputs<'a> {
    pub n_frames: usize,
    pub similarity: Option<&'a SimilarityProfile>,
    pub features: Option<&'a FeatureMatrix>,
}

impl<'a> SampleInputs<'a> {
    fn similarity(&self) -> Result<&'a SimilarityProfile> {
        let s = self
            .similarity
            .ok_or_else(|| KfsError::precondition("method needs a similarity profile"))?;
        if s.len() != self.n_frames {
            return Err(KfsError::precondition(format!(
                "similarity has {} frames, expected {}",
                s.len(),
                self.n_frames
            )));
        }
        Ok(s)
    }

    fn features(&self) -> Result<&'a FeatureMatrix> {
        let f = self
            .features
            .ok_or_else(|| KfsError::precondition("method needs a feature matrix"))?;
        if f.n_frames() != self.n_frames {
            return Err(KfsError::precondition(format!(
                "features have {} rows, expected {}",
                f.n_frames(),
                self.n_frames
            )));
        }
        Ok(f)
    }
}

/// Runs the sampler selected by `cfg.method`.
pub fn sample_frames(cfg: &SamplerConfig, inputs: SampleInputs<'_>) -> Result<SampleSet> {
    cfg.validate()?;
    let k = cfg.budget;
    match cfg.method {
        Method::Uniform => uniform_sample(inputs.n_frames, k),
        Method::Topk => topk_sample(inputs.similarity()?, k),
        Method::Its => its_sample(inputs.similarity()?, cfg.alpha, k),
        Method::Icf => icf_sample(inputs.features()?, k, cfg.seed),
        Method::Ascs => ascs_sample(inputs.similarity()?, inputs.features()?, cfg),
    }
}

/// Samples one item under each config, fitting k-means once per distinct
/// `(budget, seed)` among the clustering-based configs.
///
/// Configs are used as given; derive per-sample seeds beforehand.
pub fn sample_with_configs(configs: &[SamplerConfig], inputs: SampleInputs<'_>) -> Result<Vec<SampleSet>> {
    let mut clustering: HashMap<(usize, u64), SamplingCdf> = HashMap::new();
    configs
        .iter()
        .map(|cfg| match cfg.method {
            Method::Icf | Method::Ascs if cfg.budget < inputs.n_frames => {
                cfg.validate()?;
                let key = (cfg.budget, cfg.seed);
                let icf = match clustering.entry(key) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(icf_cdf(inputs.features()?, cfg.budget, cfg.seed)?),
                };
                if cfg.method == Method::Icf {
                    inverse_transform_sample(icf, cfg.budget)
                } else {
                    ascs_sample_with_icf(inputs.similarity()?, icf, cfg).map(|o| o.frames)
                }
            }
            _ => sample_frames(cfg, inputs),
        })
        .collect()
}
