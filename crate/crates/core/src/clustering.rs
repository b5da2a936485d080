//! K-means over frame features.
//!
//! Rows are L2-normalized, centers seeded with k-means++ from a seeded
//! generator, then refined with Lloyd iterations until the relative inertia
//! improvement drops below [`KMeansConfig::tolerance`].

use rand::Rng;

use crate::error::{KfsError, Result};
use crate::random::rng_from_seed;
use crate::timeline::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Independent k-means++ restarts; the lowest-inertia run wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iterations: 100,
            tolerance: 1e-6,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    /// Row-major `k_clusters x dim`.
    pub centers: Vec<f64>,
    pub dim: usize,
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after seeding and after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl ClusteringResult {
    pub fn k_clusters(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_clusters()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest center (squared Euclidean), ties to the smallest id.
pub fn nearest_center(point: &[f64], centers: &[f64], dim: usize) -> usize {
    assert_eq!(point.len(), dim, "point dimension mismatch");
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Rows scaled to unit L2 norm, as f64.
pub fn normalized_rows(features: &FeatureMatrix) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(features.data().len());
    for (i, row) in features.rows().enumerate() {
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(KfsError::ZeroNormRow { row: i });
        }
        out.extend(row.iter().map(|&v| v as f64 / norm));
    }
    Ok(out)
}

struct Lloyd<'a> {
    points: &'a [f64],
    dim: usize,
    n: usize,
    k: usize,
}

impl Lloyd<'_> {
    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn seed_plus_plus<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut chosen = Vec::with_capacity(self.k);
        let first = rng.random_range(0..self.n);
        chosen.push(first);
        let mut d2: Vec<f64> = (0..self.n)
            .map(|i| sq_dist(self.point(i), self.point(first)))
            .collect();
        while chosen.len() < self.k {
            let total: f64 = d2.iter().sum();
            let next = if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, &d) in d2.iter().enumerate() {
                    acc += d;
                    if d > 0.0 && acc > target {
                        pick = Some(i);
                        break;
                    }
                }
                // rounding can leave target beyond the running sum
                pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
            } else {
                // all remaining points coincide with a center
                let free: Vec<usize> = (0..self.n).filter(|i| !chosen.contains(i)).collect();
                free[rng.random_range(0..free.len())]
            };
            chosen.push(next);
            for (i, d) in d2.iter_mut().enumerate() {
                *d = d.min(sq_dist(self.point(i), self.point(next)));
            }
        }
        chosen
            .iter()
            .flat_map(|&i| self.point(i).iter().copied())
            .collect()
    }

    fn assign(&self, centers: &[f64]) -> Vec<usize> {
        (0..self.n)
            .map(|i| nearest_center(self.point(i), centers, self.dim))
            .collect()
    }

    /// Moves the point farthest from its center into each empty cluster.
    fn repair(&self, assignments: &mut [usize], centers: &mut [f64]) {
        loop {
            let mut sizes = vec![0usize; self.k];
            for &a in assignments.iter() {
                sizes[a] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                return;
            };
            let mut far = None;
            let mut far_d = f64::NEG_INFINITY;
            for (i, &c) in assignments.iter().enumerate() {
                if sizes[c] < 2 {
                    continue;
                }
                let d = sq_dist(self.point(i), &centers[c * self.dim..(c + 1) * self.dim]);
                if d > far_d {
                    far_d = d;
                    far = Some(i);
                }
            }
            let i = far.expect("n >= k guarantees a cluster with two members");
            assignments[i] = empty;
            centers[empty * self.dim..(empty + 1) * self.dim].copy_from_slice(self.point(i));
        }
    }

    fn update(&self, assignments: &[usize]) -> Vec<f64> {
        let mut sums = vec![0.0; self.k * self.dim];
        let mut sizes = vec![0usize; self.k];
        for (i, &c) in assignments.iter().enumerate() {
            sizes[c] += 1;
            for (s, v) in sums[c * self.dim..(c + 1) * self.dim]
                .iter_mut()
                .zip(self.point(i))
            {
                *s += v;
            }
        }
        for (c, &size) in sizes.iter().enumerate() {
            for s in &mut sums[c * self.dim..(c + 1) * self.dim] {
                *s /= size as f64;
            }
        }
        sums
    }

    fn inertia(&self, assignments: &[usize], centers: &[f64]) -> f64 {
        assignments
            .iter()
            .enumerate()
            .map(|(i, &c)| sq_dist(self.point(i), &centers[c * self.dim..(c + 1) * self.dim]))
            .sum()
    }

    fn run<R: Rng>(&self, rng: &mut R, cfg: &KMeansConfig) -> ClusteringResult {
        let mut centers = self.seed_plus_plus(rng);
        let mut assignments = self.assign(&centers);
        self.repair(&mut assignments, &mut centers);
        let mut inertia = self.inertia(&assignments, &centers);
        let mut history = vec![inertia];
        let mut iterations = 0;

        while iterations < cfg.max_iterations {
            iterations += 1;
            centers = self.update(&assignments);
            let mut next = self.assign(&centers);
            self.repair(&mut next, &mut centers);
            let next_inertia = self.inertia(&next, &centers);
            let converged = next == assignments
                || inertia <= 0.0
                || (inertia - next_inertia) / inertia < cfg.tolerance;
            assignments = next;
            inertia = next_inertia;
            history.push(inertia);
            if converged {
                break;
            }
        }

        let centers = self.update(&assignments);
        let inertia = self.inertia(&assignments, &centers);
        ClusteringResult {
            assignments,
            centers,
            dim: self.dim,
            inertia,
            iterations,
            inertia_history: history,
        }
    }
}

pub fn kmeans_fit(features: &FeatureMatrix, k_clusters: usize, seed: u64) -> Result<ClusteringResult> {
    kmeans_fit_with(features, k_clusters, seed, &KMeansConfig::default())
}

pub fn kmeans_fit_with(
    features: &FeatureMatrix,
    k_clusters: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<ClusteringResult> {
    let n = features.n_frames();
    if k_clusters == 0 || k_clusters > n {
        return Err(KfsError::ClusteringInfeasible {
            k_clusters,
            n_points: n,
        });
    }
    let points = normalized_rows(features)?;
    let lloyd = Lloyd {
        points: &points,
        dim: features.dim(),
        n,
        k: k_clusters,
    };
    let mut rng = rng_from_seed(seed);
    let mut best: Option<ClusteringResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let run = lloyd.run(&mut rng, cfg);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
