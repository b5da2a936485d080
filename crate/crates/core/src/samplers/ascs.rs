use crate::error::{KfsError, Result};
use crate::timeline::{FeatureMatrix, SampleSet, SamplingCdf, SimilarityProfile};

use super::icf::icf_cdf;
use super::inverse::inverse_transform_sample;
use super::its::its_cdf;
use super::qvrs::qvrs;
use super::{all_frames, SamplerConfig};

/// `(1 - w) * F_icf + w * F_sim`, pointwise.
pub fn balanced_cdf(icf: &SamplingCdf, sim: &SamplingCdf, weight: f64) -> Result<SamplingCdf> {
    if icf.len() != sim.len() {
        return Err(KfsError::precondition(format!(
            "cdf lengths differ: {} vs {}",
            icf.len(),
            sim.len()
        )));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(KfsError::precondition(format!("weight {weight} outside [0, 1]")));
    }
    let values = icf
        .values()
        .iter()
        .zip(sim.values())
        .map(|(a, b)| (1.0 - weight) * a + weight * b)
        .collect();
    SamplingCdf::new(values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscsOutcome {
    pub frames: SampleSet,
    /// `None` when the budget covers the whole video.
    pub qvrs: Option<f64>,
}

fn check_inputs(similarity: &SimilarityProfile, features: &FeatureMatrix, cfg: &SamplerConfig) -> Result<()> {
    cfg.validate()?;
    if similarity.len() != features.n_frames() {
        return Err(KfsError::precondition(format!(
            "similarity has {} frames but features have {}",
            similarity.len(),
            features.n_frames()
        )));
    }
    Ok(())
}

/// ASCS with an externally supplied balance weight instead of QVRS.
pub fn ascs_sample_with_qvrs(
    similarity: &SimilarityProfile,
    features: &FeatureMatrix,
    cfg: &SamplerConfig,
    weight: f64,
) -> Result<SampleSet> {
    check_inputs(similarity, features, cfg)?;
    let (n, k) = (similarity.len(), cfg.budget);
    if k >= n {
        return all_frames(n, k);
    }
    let icf = icf_cdf(features, k, cfg.seed)?;
    let sim = its_cdf(similarity, cfg.alpha)?;
    inverse_transform_sample(&balanced_cdf(&icf, &sim, weight)?, k)
}

/// Adaptive similarity–clustering sampling, reporting the QVRS weight used.
///
/// QVRS uses `max(k, 2)` temporal bins; with a single-frame budget the
/// one-bin entropy is undefined.
pub fn ascs_sample_detailed(
    similarity: &SimilarityProfile,
    features: &FeatureMatrix,
    cfg: &SamplerConfig,
) -> Result<AscsOutcome> {
    check_inputs(similarity, features, cfg)?;
    let (n, k) = (similarity.len(), cfg.budget);
    if k >= n {
        return Ok(AscsOutcome {
            frames: all_frames(n, k)?,
            qvrs: None,
        });
    }
    let icf = icf_cdf(features, k, cfg.seed)?;
    ascs_sample_with_icf(similarity, &icf, cfg)
}

/// ASCS on a precomputed clustering CDF, so sweeps over the similarity-side
/// parameters (`alpha`, `tau`, `gamma`) fit k-means once per sample.
pub fn ascs_sample_with_icf(similarity: &SimilarityProfile, icf: &SamplingCdf, cfg: &SamplerConfig) -> Result<AscsOutcome> {
    cfg.validate()?;
    let (n, k) = (similarity.len(), cfg.budget);
    if icf.len() != n {
        return Err(KfsError::precondition(format!(
            "similarity has {n} frames but the clustering cdf has {}",
            icf.len()
        )));
    }
    if k >= n {
        return Ok(AscsOutcome {
            frames: all_frames(n, k)?,
            qvrs: None,
        });
    }
    let weight = qvrs(similarity, k.max(2), cfg.tau, cfg.gamma)?;
    let sim = its_cdf(similarity, cfg.alpha)?;
    Ok(AscsOutcome {
        frames: inverse_transform_sample(&balanced_cdf(icf, &sim, weight)?, k)?,
        qvrs: Some(weight),
    })
}

pub fn ascs_sample(
    similarity: &SimilarityProfile,
    features: &FeatureMatrix,
    cfg: &SamplerConfig,
) -> Result<SampleSet> {
    ascs_sample_detailed(similarity, features, cfg).map(|o| o.frames)
}
