use crate::error::{KfsError, Result};
use crate::timeline::{SampleSet, SamplingCdf, SimilarityProfile};

use super::inverse::{build_cdf, inverse_transform_sample};

/// Min-max scales similarities to [0, 1] and raises them to `alpha`.
///
/// A constant profile carries no ranking information and maps to all
/// ones, so ITS falls back to uniform sampling.
pub fn its_normalize(similarity: &SimilarityProfile, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(KfsError::precondition(format!("alpha={alpha} must be > 0")));
    }
    let s = similarity.scores();
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) {
        return Ok(vec![1.0; s.len()]);
    }
    Ok(s.iter().map(|v| ((v - min) / range).powf(alpha)).collect())
}

/// CDF of the power-normalized similarities.
pub fn its_cdf(similarity: &SimilarityProfile, alpha: f64) -> Result<SamplingCdf> {
    build_cdf(&its_normalize(similarity, alpha)?)
}

pub fn its_sample(similarity: &SimilarityProfile, alpha: f64, k: usize) -> Result<SampleSet> {
    inverse_transform_sample(&its_cdf(similarity, alpha)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(v: Vec<f64>) -> SimilarityProfile {
        SimilarityProfile::new(v).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(its_normalize(&profile(vec![0.0, 1.0, 2.0]), 1.0).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(its_normalize(&profile(vec![0.4; 5]), 3.0).unwrap(), vec![1.0; 5]);
        let once = its_normalize(&profile(vec![3.0, -1.0, 0.5, 7.0]), 1.0).unwrap();
        let twice = its_normalize(&profile(once.clone()), 1.0).unwrap();
        assert_eq!(once, twice);
        assert!(its_normalize(&profile(vec![1.0, 2.0]), 0.0).is_err());
    }

    #[test]
    fn sample_examples() {
        assert_eq!(its_sample(&profile(vec![0.2; 8]), 4.0, 4).unwrap().frames(), &[1, 3, 5, 7]);
        let mut s = vec![0.0; 10];
        s[4] = 1.0;
        assert_eq!(its_sample(&profile(s), 5.0, 3).unwrap().frames(), &[3, 4, 5]);
    }

    #[test]
    fn larger_alpha_concentrates_on_high_similarity() {
        // high-similarity block at frames 40..60 of 100; frame 0 holds the minimum
        let s: Vec<f64> = (0..100)
            .map(|i| match i {
                0 => 0.0,
                40..60 => 1.0,
                _ => 0.3,
            })
            .collect();
        let p = profile(s);
        let in_block = |set: &SampleSet| set.frames().iter().filter(|f| (40..60).contains(*f)).count();
        let flat = its_sample(&p, 0.05, 10).unwrap();
        let sharp = its_sample(&p, 10.0, 10).unwrap();
        assert!(in_block(&sharp) > in_block(&flat));
        // the q = 1 quantile always lands on the last frame with nonzero weight
        assert!(in_block(&sharp) >= 9, "{:?}", sharp.frames());
    }

    proptest! {
        #[test]
        fn normalize_is_monotone(s in proptest::collection::vec(-5.0f64..5.0, 2..50), alpha in 0.01f64..12.0) {
            let w = its_normalize(&profile(s.clone()), alpha).unwrap();
            for i in 0..s.len() {
                for j in 0..s.len() {
                    if s[i] <= s[j] {
                        prop_assert!(w[i] <= w[j]);
                    }
                }
            }
        }
    }
}
