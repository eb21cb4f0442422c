//! Brute-force references: slow, obviously correct, used only to check the
//! fast implementations.

use std::collections::BTreeSet;

use crate::analysis::{ContingencyTable, KMeansFit};
use crate::nn::{sq_dist, Matrix};

/// One greedy Ward merge: the two member sets and `sqrt(2 · ΔSSE)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMerge {
    pub left: BTreeSet<usize>,
    pub right: BTreeSet<usize>,
    pub distance: f64,
}

fn centroid(points: &Matrix, members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; points.cols()];
    for &i in members {
        for (cj, &x) in c.iter_mut().zip(points.row(i)) {
            *cj += x;
        }
    }
    c.iter_mut().for_each(|v| *v /= members.len() as f64);
    c
}

fn sse(points: &Matrix, members: &[usize]) -> f64 {
    let c = centroid(points, members);
    members.iter().map(|&i| sq_dist(points.row(i), &c)).sum()
}

/// Rescans every pair of clusters at every step and merges the pair with the
/// smallest increase in total within-cluster sum of squares.
pub fn brute_force_ward(points: &Matrix) -> Vec<OracleMerge> {
    let mut clusters: Vec<Vec<usize>> = (0..points.rows()).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut joined = clusters[a].clone();
                joined.extend(&clusters[b]);
                let delta = sse(points, &joined) - sse(points, &clusters[a]) - sse(points, &clusters[b]);
                if delta < best.0 {
                    best = (delta, a, b);
                }
            }
        }
        let (delta, a, b) = best;
        let right = clusters.remove(b);
        let left = clusters.remove(a);
        merges.push(OracleMerge {
            left: left.iter().copied().collect(),
            right: right.iter().copied().collect(),
            distance: (2.0 * delta.max(0.0)).sqrt(),
        });
        let mut joined = left;
        joined.extend(right);
        clusters.push(joined);
    }
    merges
}

/// Minimum 2-means inertia over every split into two non-empty groups.
pub fn best_two_partition(points: &Matrix) -> (f64, Vec<usize>) {
    let n = points.rows();
    assert!((2..=20).contains(&n), "exhaustive search needs 2..=20 points");
    let mut best = (f64::INFINITY, Vec::new());
    // point 0 always in group 0, so each split is visited once
    for mask in 0u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n)
            .map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize })
            .collect();
        let g1: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
        if g1.is_empty() {
            continue;
        }
        let g0: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
        let inertia = sse(points, &g0) + sse(points, &g1);
        if inertia < best.0 {
            best = (inertia, labels);
        }
    }
    best
}

/// True when every point is assigned to its nearest centroid and every
/// centroid is the mean of its points (both within `tol`).
pub fn is_lloyd_fixed_point(points: &Matrix, fit: &KMeansFit, tol: f64) -> bool {
    let labels = &fit.assignment.labels;
    for (i, row) in points.iter_rows().enumerate() {
        let own = sq_dist(row, fit.centroids.row(labels[i]));
        if fit.centroids.iter_rows().any(|c| sq_dist(row, c) < own - tol) {
            return false;
        }
    }
    (0..fit.centroids.rows()).all(|j| {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == j).collect();
        !members.is_empty()
            && centroid(points, &members)
                .iter()
                .zip(fit.centroids.row(j))
                .all(|(a, b)| (a - b).abs() <= tol)
    })
}

/// Exact binomial coefficient; panics on overflow.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc · (n − i) / (i + 1) is an integer at every step
        acc = acc.checked_mul((n - i) as u128).expect("binomial overflow") / (i + 1) as u128;
    }
    acc
}

/// Two-sided Fisher p-value by enumerating every table with the observed
/// margins in exact integer arithmetic. Tables count as at least as extreme
/// when their weight is within a relative `1e-7` of the observed one.
pub fn fisher_enumeration(table: &ContingencyTable) -> f64 {
    let row_a = table.a + table.b;
    let row_b = table.c + table.d;
    let col = table.a + table.c;
    let weight = |x: u64| binomial(row_a, x) * binomial(row_b, col - x);
    let observed = weight(table.a);
    let lo = col.saturating_sub(row_b);
    let hi = row_a.min(col);
    let mut hit: u128 = 0;
    for x in lo..=hi {
        let w = weight(x);
        if w * 10_000_000 <= observed * 10_000_001 {
            hit += w;
        }
    }
    hit as f64 / binomial(row_a + row_b, col) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(100, 50), 100_891_344_545_564_193_334_812_497_256);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn tea_tasting() {
        assert!((fisher_enumeration(&ContingencyTable::new(3, 1, 1, 3)) - 34.0 / 70.0).abs() < 1e-15);
    }

    #[test]
    fn ward_oracle_on_a_line() {
        let p = Matrix::from_vec(3, 1, vec![0.0, 1.0, 5.0]).unwrap();
        let m = brute_force_ward(&p);
        assert_eq!(m[0].distance, 1.0);
        assert_eq!(m[0].left, BTreeSet::from([0]));
        // {0,1} vs {5}: ΔSSE = (2·1/3)·4.5² = 13.5
        assert!((m[1].distance - 27f64.sqrt()).abs() < 1e-12);
    }
}
