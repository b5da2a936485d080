use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KfsError, Result};
use crate::metrics::SampleMetrics;
use crate::random::rng_from_seed;

/// Grid coordinates shared by both axes (KFR columns, SHR rows).
pub const TABLE1_AXIS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Published QA accuracy (%), rows SHR = 20..100 %, columns KFR = 20..100 %.
pub const TABLE1_PUBLISHED: [[f64; 5]; 5] = [
    [64.6, 66.7, 67.3, 66.8, 67.3],
    [65.0, 66.6, 67.3, 67.5, 68.7],
    [65.3, 67.6, 67.8, 68.2, 68.8],
    [65.5, 67.8, 68.9, 69.9, 71.3],
    [66.9, 68.7, 70.0, 71.2, 73.2],
];

/// Accuracy with no key frames at all (KFR = SHR = 0).
pub const FLOOR_ACCURACY: f64 = 53.8;

/// Worst and best accuracy across the scene-distribution sweep; their
/// ratio is the penalty for a maximally unbalanced distribution.
pub const DISTRIBUTION_WORST: f64 = 68.2;
pub const DISTRIBUTION_BEST: f64 = 73.1;

/// Stochastic QA model: Bernoulli draws whose success probability follows
/// the accuracy grid over (KFR, SHR), scaled down for unbalanced scene
/// coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModel {
    /// 6×6 accuracy (%) at `TABLE1_AXIS`, `grid[shr][kfr]`.
    pub grid: Vec<Vec<f64>>,
    /// Multiplier at BDS = 0; the multiplier is 1 at BDS = 1.
    pub distribution_ratio: f64,
    /// Lower bound on the probability (%).
    pub floor: f64,
    pub seed: u64,
}

impl OracleModel {
    /// The published grid, extended with the no-key-frame floor on the
    /// zero row and column and made monotone by a running maximum along
    /// both axes (two published cells dip by 0.1–0.5 points).
    pub fn calibrated(seed: u64) -> Self {
        let mut grid = vec![vec![FLOOR_ACCURACY; 6]; 6];
        for (r, row) in TABLE1_PUBLISHED.iter().enumerate() {
            grid[r + 1][1..].copy_from_slice(row);
        }
        for r in 0..6 {
            for c in 0..6 {
                let mut v = grid[r][c];
                if r > 0 {
                    v = v.max(grid[r - 1][c]);
                }
                if c > 0 {
                    v = v.max(grid[r][c - 1]);
                }
                grid[r][c] = v;
            }
        }
        OracleModel {
            grid,
            distribution_ratio: DISTRIBUTION_WORST / DISTRIBUTION_BEST,
            floor: FLOOR_ACCURACY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KfsError::precondition(msg));
        if self.grid.len() != 6 || self.grid.iter().any(|r| r.len() != 6) {
            return bad("oracle grid must be 6x6".into());
        }
        for r in 0..6 {
            for c in 0..6 {
                let v = self.grid[r][c];
                if !(0.0..=100.0).contains(&v) {
                    return bad(format!("grid[{r}][{c}]={v} outside [0, 100]"));
                }
                if (r > 0 && v < self.grid[r - 1][c]) || (c > 0 && v < self.grid[r][c - 1]) {
                    return bad(format!("grid is not monotone at [{r}][{c}]"));
                }
            }
        }
        if !(self.distribution_ratio > 0.0 && self.distribution_ratio <= 1.0) {
            return bad(format!("distribution_ratio={} outside (0, 1]", self.distribution_ratio));
        }
        if !(0.0..=100.0).contains(&self.floor) {
            return bad(format!("floor={} outside [0, 100]", self.floor));
        }
        Ok(())
    }

    /// Bilinear interpolation of the grid; exact at grid nodes.
    pub fn grid_accuracy(&self, kfr: f64, shr: f64) -> f64 {
        let locate = |x: f64| {
            let pos = x.clamp(0.0, 1.0) * 5.0;
            let cell = (pos.floor() as usize).min(4);
            (cell, pos - cell as f64)
        };
        let (c, tx) = locate(kfr);
        let (r, ty) = locate(shr);
        let g = &self.grid;
        let lower = g[r][c] + tx * (g[r][c + 1] - g[r][c]);
        let upper = g[r + 1][c] + tx * (g[r + 1][c + 1] - g[r + 1][c]);
        lower + ty * (upper - lower)
    }

    /// 1 at BDS = 1, `distribution_ratio` at BDS = 0, linear in between.
    pub fn distribution_factor(&self, bds: f64) -> f64 {
        1.0 - (1.0 - self.distribution_ratio) * (1.0 - bds.clamp(0.0, 1.0))
    }

    /// Probability of a correct answer, in percent.
    pub fn probability(&self, kfr: f64, shr: f64, bds: f64) -> f64 {
        (self.grid_accuracy(kfr, shr) * self.distribution_factor(bds)).max(self.floor)
    }

    pub fn probability_for(&self, metrics: &SampleMetrics) -> f64 {
        self.probability(metrics.kfr, metrics.shr, metrics.bds)
    }
}

/// One Bernoulli draw: whether the modelled QA system answers correctly.
pub fn oracle_accuracy(metrics: &SampleMetrics, model: &OracleModel, seed: u64) -> bool {
    let p = model.probability_for(metrics) / 100.0;
    rng_from_seed(seed).random::<f64>() < p
}
