//! k-means with k-means++ seeding and Lloyd iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{sq_dist, Matrix};
use crate::rng::Rng;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_ITER: usize = 300;

/// Hard partition of samples into `k` non-empty clusters with ids in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        let mut seen = vec![false; k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::invalid(format!("label {l} of sample {i} is not below k={k}")));
            }
            seen[l] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("cluster {empty} is empty")));
        }
        Ok(Self { labels, k })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Matrix,
    pub assignment: ClusterAssignment,
    pub inertia: f64,
    /// Inertia after each Lloyd iteration of the winning restart.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn inertia(points: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    points
        .iter_rows()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

/// Best of [`DEFAULT_RESTARTS`] seeded runs.
pub fn kmeans(points: &Matrix, k: usize, rng: &mut Rng) -> Result<KMeansFit> {
    kmeans_restarts(points, k, DEFAULT_RESTARTS, rng)
}

/// Runs `restarts` independent k-means++/Lloyd fits and keeps the lowest
/// inertia (earliest restart on ties).
pub fn kmeans_restarts(points: &Matrix, k: usize, restarts: usize, rng: &mut Rng) -> Result<KMeansFit> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k={k} exceeds the {n} available samples")));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("kmeans input".into()));
    }
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let seeds = plus_plus_seeds(points, k, rng);
        let fit = lloyd(points, seeds);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_seeds(points: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.below(n));
    let mut d2: Vec<f64> = points.iter_rows().map(|p| sq_dist(p, points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just past the final partial sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

/// Index of the nearest centroid, lowest index on ties.
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn recompute_centroids(points: &Matrix, labels: &[usize], centroids: &mut Matrix) -> Vec<usize> {
    let k = centroids.rows();
    let mut sums = Matrix::zeros(k, points.cols());
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, &v) in sums.row_mut(l).iter_mut().zip(p) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            let c = counts[j] as f64;
            for (dst, &s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                *dst = s / c;
            }
        }
    }
    counts
}

fn lloyd(points: &Matrix, mut centroids: Matrix) -> KMeansFit {
    let n = points.rows();
    let k = centroids.rows();
    let mut labels: Vec<usize> = points.iter_rows().map(|p| nearest(p, &centroids).0).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut counts = recompute_centroids(points, &labels, &mut centroids);
        // an empty cluster takes the point farthest from its centroid among
        // clusters that can spare one
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let mut donor: Option<(usize, f64)> = None;
            for i in (0..n).filter(|&i| counts[labels[i]] > 1) {
                let d = sq_dist(points.row(i), centroids.row(labels[i]));
                if donor.is_none_or(|(_, bd)| d > bd) {
                    donor = Some((i, d));
                }
            }
            let (donor, _) = donor.expect("k <= n guarantees a donor");
            labels[donor] = empty;
            centroids.row_mut(empty).copy_from_slice(points.row(donor));
            counts = recompute_centroids(points, &labels, &mut centroids);
        }
        history.push(inertia(points, &centroids, &labels));
        let new_labels: Vec<usize> = points.iter_rows().map(|p| nearest(p, &centroids).0).collect();
        if new_labels == labels || iterations >= MAX_ITER {
            break;
        }
        labels = new_labels;
    }
    let inertia = inertia(points, &centroids, &labels);
    KMeansFit {
        centroids,
        assignment: ClusterAssignment { labels, k },
        inertia,
        inertia_history: history,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![5.0, -1.0], vec![3.0, 3.0]]).unwrap();
        let fit = kmeans(&pts, 4, &mut Rng::new(3)).unwrap();
        assert_eq!(fit.inertia, 0.0);
        let mut sizes = fit.assignment.sizes();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 1, 1]);
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let pts = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let fit = kmeans(&pts, 3, &mut Rng::new(0)).unwrap();
        assert_eq!(fit.assignment.sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn k_above_n_is_an_error() {
        assert!(kmeans(&Matrix::zeros(2, 2), 3, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn assignment_validation() {
        assert!(ClusterAssignment::new(vec![0, 2], 2).is_err());
        assert!(ClusterAssignment::new(vec![0, 0], 2).is_err());
        assert_eq!(ClusterAssignment::new(vec![1, 0, 1], 2).unwrap().members(1), vec![0, 2]);
    }
}
