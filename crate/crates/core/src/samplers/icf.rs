use crate::clustering::kmeans_fit;
use crate::error::{KfsError, Result};
use crate::timeline::{FeatureMatrix, SampleSet, SamplingCdf};

use super::inverse::{build_cdf, inverse_transform_sample};
use super::{all_frames, FrameDistribution};

/// Inverse cluster frequency: `P(i) = 1 / (|cluster(i)| * k_clusters)`.
pub fn icf_distribution(assignments: &[usize], k_clusters: usize) -> Result<FrameDistribution> {
    if k_clusters == 0 {
        return Err(KfsError::InvalidClustering("zero clusters".into()));
    }
    let mut sizes = vec![0usize; k_clusters];
    for (i, &c) in assignments.iter().enumerate() {
        if c >= k_clusters {
            return Err(KfsError::InvalidClustering(format!(
                "frame {i} assigned to cluster {c} of {k_clusters}"
            )));
        }
        sizes[c] += 1;
    }
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(KfsError::InvalidClustering(format!("cluster {c} is empty")));
    }
    let probs = assignments
        .iter()
        .map(|&c| 1.0 / (sizes[c] as f64 * k_clusters as f64))
        .collect();
    FrameDistribution::new(probs)
}

/// CDF of the ICF distribution of a `k`-cluster k-means partition.
pub fn icf_cdf(features: &FeatureMatrix, k: usize, seed: u64) -> Result<SamplingCdf> {
    let clustering = kmeans_fit(features, k, seed)?;
    let dist = icf_distribution(&clustering.assignments, k)?;
    build_cdf(dist.probs())
}

/// Clustering-based sampling with `k` clusters for a budget of `k` frames.
pub fn icf_sample(features: &FeatureMatrix, k: usize, seed: u64) -> Result<SampleSet> {
    if k == 0 {
        return Err(KfsError::precondition("k must be at least 1"));
    }
    let n = features.n_frames();
    if k >= n {
        return all_frames(n, k);
    }
    inverse_transform_sample(&icf_cdf(features, k, seed)?, k)
}
