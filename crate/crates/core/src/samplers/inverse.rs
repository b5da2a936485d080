use crate::error::{KfsError, Result};
use crate::timeline::{SampleSet, SamplingCdf};

/// A CDF value within this distance below a quantile counts as reaching it,
/// so steps that are exact in real arithmetic are not lost to rounding.
pub const QUANTILE_TOLERANCE: f64 = 1e-12;

/// Normalized running sum of nonnegative weights.
///
/// The last value is exactly 1: the total is the last running sum.
pub fn build_cdf(weights: &[f64]) -> Result<SamplingCdf> {
    if weights.is_empty() {
        return Err(KfsError::DegenerateWeights("no weights".into()));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(KfsError::DegenerateWeights(format!(
            "weight {} at frame {i} is negative or non-finite",
            weights[i]
        )));
    }
    let mut running = 0.0;
    let prefix: Vec<f64> = weights
        .iter()
        .map(|w| {
            running += w;
            running
        })
        .collect();
    if running <= 0.0 {
        return Err(KfsError::DegenerateWeights("all weights are zero".into()));
    }
    SamplingCdf::new(prefix.iter().map(|p| p / running).collect())
}

/// Disjoint-set "next free slot" lookups in both directions.
struct FreeSlots {
    right: Vec<usize>,
    left: Vec<usize>,
}

impl FreeSlots {
    // right[i] == i means free; index n is a sentinel.
    // left is shifted by one: left[i + 1] tracks slot i; left[0] is a sentinel.
    fn new(n: usize) -> Self {
        FreeSlots {
            right: (0..=n).collect(),
            left: (0..=n).collect(),
        }
    }

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        while parent[i] != root {
            let next = parent[i];
            parent[i] = root;
            i = next;
        }
        root
    }

    /// Smallest free slot `>= i`, or `n` if none.
    fn free_at_or_after(&mut self, i: usize) -> usize {
        Self::find(&mut self.right, i)
    }

    /// Largest free slot `<= i`.
    fn free_at_or_before(&mut self, i: usize) -> Option<usize> {
        let r = Self::find(&mut self.left, i + 1);
        r.checked_sub(1)
    }

    fn take(&mut self, i: usize) {
        self.right[i] = i + 1;
        self.left[i + 1] = i;
    }
}

/// Selects frames at the quantiles `j / k`, `j = 1..=k`.
///
/// Each quantile maps to the smallest index with
/// `F(t) >= q - QUANTILE_TOLERANCE` (the last
/// index if rounding keeps `F` below `q`). A quantile landing on an index
/// that is already taken moves to the nearest free index, the larger one on
/// a distance tie. Returns `min(k, n)` distinct sorted indices.
pub fn inverse_transform_sample(cdf: &SamplingCdf, k: usize) -> Result<SampleSet> {
    if k == 0 {
        return Err(KfsError::precondition("k must be at least 1"));
    }
    let f = cdf.values();
    let n = f.len();
    let mut slots = FreeSlots::new(n);
    let mut frames = Vec::with_capacity(k.min(n));
    let mut t = 0;
    for j in 1..=k {
        if frames.len() == n {
            break;
        }
        let q = j as f64 / k as f64 - QUANTILE_TOLERANCE;
        while t + 1 < n && f[t] < q {
            t += 1;
        }
        let right = slots.free_at_or_after(t);
        let left = slots.free_at_or_before(t);
        let pick = match (left, right < n) {
            (Some(l), true) => {
                if right - t <= t - l {
                    right
                } else {
                    l
                }
            }
            (None, true) => right,
            (Some(l), false) => l,
            (None, false) => unreachable!("fewer than n frames taken"),
        };
        slots.take(pick);
        frames.push(pick);
    }
    SampleSet::from_unsorted(frames, k, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        assert_eq!(build_cdf(&[1.0; 4]).unwrap().values(), &[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(build_cdf(&[0.0, 0.0, 1.0]).unwrap().values(), &[0.0, 0.0, 1.0]);
        assert_eq!(build_cdf(&[1.0, 3.0]).unwrap().values(), &[0.25, 1.0]);
        assert!(matches!(build_cdf(&[0.0, 0.0]), Err(KfsError::DegenerateWeights(_))));
        assert!(build_cdf(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn inverse_examples() {
        let uniform = build_cdf(&[1.0; 8]).unwrap();
        assert_eq!(inverse_transform_sample(&uniform, 4).unwrap().frames(), &[1, 3, 5, 7]);
        let mut w = vec![0.0; 10];
        w[4] = 1.0;
        let point = build_cdf(&w).unwrap();
        assert_eq!(inverse_transform_sample(&point, 3).unwrap().frames(), &[3, 4, 5]);
        assert_eq!(
            inverse_transform_sample(&uniform, 8).unwrap().frames(),
            &(0..8).collect::<Vec<_>>()[..]
        );
        assert_eq!(inverse_transform_sample(&uniform, 20).unwrap().len(), 8);
    }

    #[test]
    fn dedup_at_edges() {
        // all mass on the last frame: expansion has to go left
        let mut w = vec![0.0; 6];
        w[5] = 1.0;
        let cdf = build_cdf(&w).unwrap();
        assert_eq!(inverse_transform_sample(&cdf, 3).unwrap().frames(), &[3, 4, 5]);
        // all mass on the first frame: expansion goes right
        let mut w = vec![0.0; 6];
        w[0] = 1.0;
        let cdf = build_cdf(&w).unwrap();
        assert_eq!(inverse_transform_sample(&cdf, 3).unwrap().frames(), &[0, 1, 2]);
    }
}
