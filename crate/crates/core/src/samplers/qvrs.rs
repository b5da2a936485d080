//! Question–video relevance score.
//!
//! Similarities are MAD-normalized, turned into a softmax distribution `Q`
//! and scored by three concentration indicators: entropy over `k` equal
//! temporal bins, entropy of the spans of `k` equal-mass bins, and the
//! shortest window holding `gamma` of the mass. QVRS is the geometric mean
//! of their complements.

use crate::error::{KfsError, Result};
use crate::timeline::SimilarityProfile;

use super::FrameDistribution;

/// MAD below this is treated as zero.
pub const MAD_FLOOR: f64 = 1e-12;

/// Slack on the coverage-window mass comparison, absorbs summation error.
pub const COVERAGE_TOLERANCE: f64 = 1e-10;

/// Indicator factors below this are snapped to zero.
const FACTOR_FLOOR: f64 = 1e-12;

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `(s_i - median(s)) / MAD(s)`.
///
/// When more than half the scores coincide the MAD vanishes; the scale then
/// falls back to the mean absolute deviation from the median, so a lone
/// spike still stands out. Constant scores give all zeros.
pub fn mad_normalize(similarity: &SimilarityProfile) -> Vec<f64> {
    let s = similarity.scores();
    let med = median(s);
    let deviations: Vec<f64> = s.iter().map(|v| (v - med).abs()).collect();
    let mut scale = median(&deviations);
    if scale < MAD_FLOOR {
        scale = deviations.iter().sum::<f64>() / s.len() as f64;
    }
    if scale < MAD_FLOOR {
        return vec![0.0; s.len()];
    }
    s.iter().map(|v| (v - med) / scale).collect()
}

/// Temperature softmax with max subtraction.
pub fn softmax_distribution(z: &[f64], tau: f64) -> Result<FrameDistribution> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(KfsError::precondition(format!("tau={tau} must be > 0")));
    }
    if z.is_empty() {
        return Err(KfsError::precondition("softmax of an empty vector"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| ((v - max) / tau).exp()).collect();
    let sum: f64 = exps.iter().sum();
    FrameDistribution::new(exps.iter().map(|e| e / sum).collect())
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

fn check_bins(k: usize, n: usize) -> Result<()> {
    if k < 2 {
        return Err(KfsError::precondition(format!("need at least 2 bins, got {k}")));
    }
    if n < k {
        return Err(KfsError::Binning { bins: k, n_frames: n });
    }
    Ok(())
}

/// Entropy of `Q` summed into `k` equal-width index bins.
pub fn temporal_bin_entropy(q: &FrameDistribution, k: usize) -> Result<f64> {
    let p = q.probs();
    let n = p.len();
    check_bins(k, n)?;
    let h: f64 = (0..k)
        .map(|b| {
            let lo = b * n / k;
            let hi = (b + 1) * n / k;
            -plogp(p[lo..hi].iter().sum())
        })
        .sum();
    Ok(h.clamp(0.0, (k as f64).ln()))
}

/// Entropy of the temporal spans between successive `b/k` crossings of the
/// cumulative mass, normalized by `n - 1`.
///
/// Indices follow the 1-based convention `C(i) = Q(1) + ... + Q(i)` with
/// `u_0 = 1`. Spans may sum to less than `n - 1`; no renormalization is
/// applied and the result is clamped to `[0, ln k]`.
pub fn mass_bin_entropy(q: &FrameDistribution, k: usize) -> Result<f64> {
    let p = q.probs();
    let n = p.len();
    if n < 2 {
        return Err(KfsError::Binning { bins: k, n_frames: n });
    }
    check_bins(k, n)?;
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in p {
        acc += v;
        cumulative.push(acc);
    }
    let denom = (n - 1) as f64;
    let mut prev_u = 1usize;
    let mut i = 0usize; // 0-based cursor, monotone in b
    let mut h = 0.0;
    for b in 1..=k {
        let level = b as f64 / k as f64;
        while i + 1 < n && cumulative[i] < level {
            i += 1;
        }
        let u = i + 1;
        h -= plogp((u - prev_u) as f64 / denom);
        prev_u = u;
    }
    Ok(h.clamp(0.0, (k as f64).ln()))
}

/// Length of the shortest contiguous window whose mass reaches `gamma`.
pub fn shortest_coverage_window(q: &FrameDistribution, gamma: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(KfsError::precondition(format!("gamma={gamma} must lie in (0, 1)")));
    }
    let p = q.probs();
    let n = p.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in p {
        acc += v;
        prefix.push(acc);
    }
    let target = gamma - COVERAGE_TOLERANCE;
    let mut best = n;
    let mut left = 0;
    for right in 0..n {
        // shrink while the window without its left end still qualifies
        while left < right && prefix[right + 1] - prefix[left + 1] >= target {
            left += 1;
        }
        if prefix[right + 1] - prefix[left] >= target {
            best = best.min(right - left + 1);
        }
    }
    Ok(best)
}

/// The three QVRS indicators and the resulting score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QvrsBreakdown {
    pub h_time: f64,
    pub h_mass: f64,
    pub l_cov: usize,
    pub score: f64,
}

pub fn qvrs_breakdown(
    similarity: &SimilarityProfile,
    k: usize,
    tau: f64,
    gamma: f64,
) -> Result<QvrsBreakdown> {
    let n = similarity.len();
    check_bins(k, n)?;
    let z = mad_normalize(similarity);
    let q = softmax_distribution(&z, tau)?;
    let h_time = temporal_bin_entropy(&q, k)?;
    let h_mass = mass_bin_entropy(&q, k)?;
    let l_cov = shortest_coverage_window(&q, gamma)?;
    // flat similarity carries no question signal
    if z.iter().all(|&v| v == 0.0) {
        return Ok(QvrsBreakdown {
            h_time,
            h_mass,
            l_cov,
            score: 0.0,
        });
    }
    let log_k = (k as f64).ln();
    let factor = |x: f64| {
        let f = x.clamp(0.0, 1.0);
        if f < FACTOR_FLOOR {
            0.0
        } else {
            f
        }
    };
    let product = factor(1.0 - h_time / log_k)
        * factor(1.0 - h_mass / log_k)
        * factor(1.0 - l_cov as f64 / n as f64);
    Ok(QvrsBreakdown {
        h_time,
        h_mass,
        l_cov,
        score: product.cbrt(),
    })
}

pub fn qvrs(similarity: &SimilarityProfile, k: usize, tau: f64, gamma: f64) -> Result<f64> {
    qvrs_breakdown(similarity, k, tau, gamma).map(|b| b.score)
}
