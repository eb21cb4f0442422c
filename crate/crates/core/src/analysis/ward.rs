//! Agglomerative clustering with Ward linkage and tree cutting.
//!
//! Merge distances follow the Lance–Williams Ward recurrence on squared
//! Euclidean distances and are reported as `sqrt(2 · ΔSSE)`, so two
//! singletons merge at their Euclidean distance. Leaves carry ids `0..n`;
//! the cluster created by merge `t` has id `n + t`.
//!
//! Each active cluster caches its nearest neighbour. Ward linkage is
//! reducible, so a merge can only move a cached neighbour when it pointed at
//! one of the merged clusters or the merged cluster is now closer; the
//! greedy merge order is therefore identical to an exhaustive scan.

use serde::{Deserialize, Serialize};

use crate::analysis::ClusterAssignment;
use crate::error::{Error, Result};
use crate::nn::{sq_dist, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub new_id: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTree {
    pub merges: Vec<Merge>,
    pub leaf_count: usize,
}

struct Condensed {
    n: usize,
    data: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * self.n - a * (a + 1) / 2 + (b - a - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }
}

pub fn agglomerative_ward(points: &Matrix) -> Result<LinkageTree> {
    let n = points.rows();
    if n < 2 {
        return Err(Error::invalid(format!(
            "Ward clustering needs at least 2 points, got {n}"
        )));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("Ward input".into()));
    }
    let mut d = Condensed {
        n,
        data: vec![0.0; n * (n - 1) / 2],
    };
    for i in 0..n {
        for j in i + 1..n {
            d.set(i, j, sq_dist(points.row(i), points.row(j)));
        }
    }

    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];

    let refresh = |i: usize, active: &[bool], d: &Condensed, nn: &mut [usize], nn_d: &mut [f64]| {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..n {
            if j != i && active[j] {
                let v = d.get(i, j);
                if v < best.1 {
                    best = (j, v);
                }
            }
        }
        nn[i] = best.0;
        nn_d[i] = best.1;
    };

    for i in 0..n {
        refresh(i, &active, &d, &mut nn, &mut nn_d);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut a = usize::MAX;
        for i in (0..n).filter(|&i| active[i]) {
            if a == usize::MAX || nn_d[i] < nn_d[a] {
                a = i;
            }
        }
        let b = nn[a];
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        let dab = d.get(a, b);
        let (sa, sb) = (size[a] as f64, size[b] as f64);

        for k in (0..n).filter(|&k| active[k] && k != a && k != b) {
            let sk = size[k] as f64;
            let v = ((sa + sk) * d.get(k, a) + (sb + sk) * d.get(k, b) - sk * dab) / (sa + sb + sk);
            d.set(k, a, v.max(0.0));
        }

        merges.push(Merge {
            left: id[a].min(id[b]),
            right: id[a].max(id[b]),
            distance: dab.max(0.0).sqrt(),
            new_id: n + step,
            size: size[a] + size[b],
        });
        active[b] = false;
        size[a] += size[b];
        id[a] = n + step;

        if step == n - 2 {
            break;
        }
        refresh(a, &active, &d, &mut nn, &mut nn_d);
        for k in (0..n).filter(|&k| active[k] && k != a) {
            if nn[k] == a || nn[k] == b {
                refresh(k, &active, &d, &mut nn, &mut nn_d);
            } else {
                let v = d.get(k, a);
                if v < nn_d[k] || (v == nn_d[k] && a < nn[k]) {
                    nn[k] = a;
                    nn_d[k] = v;
                }
            }
        }
    }
    Ok(LinkageTree { merges, leaf_count: n })
}

impl LinkageTree {
    /// Leaves under every node id (`0..2n-1`), each list sorted.
    pub fn node_members(&self) -> Vec<Vec<usize>> {
        let n = self.leaf_count;
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for m in &self.merges {
            let mut v = members[m.left].clone();
            v.extend_from_slice(&members[m.right]);
            v.sort_unstable();
            members.push(v);
        }
        members
    }

    /// Root id (the last merge's new cluster).
    pub fn root(&self) -> usize {
        self.merges.last().map_or(0, |m| m.new_id)
    }

    /// Children of an internal node id, or `None` for a leaf.
    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaf_count)
            .and_then(|t| self.merges.get(t))
            .map(|m| (m.left, m.right))
    }
}

/// Partition obtained by undoing the last `k − 1` merges. Cluster ids are
/// numbered by first appearance in leaf order.
pub fn cut_tree(tree: &LinkageTree, k: usize) -> Result<ClusterAssignment> {
    let n = tree.leaf_count;
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cut size k={k} must lie in [1, {n}]")));
    }
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in &tree.merges[..n - k] {
        parent[m.left] = m.new_id;
        parent[m.right] = m.new_id;
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for leaf in 0..n {
        let r = find(&mut parent, leaf);
        let next = label_of_root.len();
        labels.push(*label_of_root.entry(r).or_insert(next));
    }
    ClusterAssignment::new(labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Matrix {
        Matrix::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn closest_pair_merges_first() {
        let tree = agglomerative_ward(&line(&[0.0, 1.0, 10.0])).unwrap();
        assert_eq!((tree.merges[0].left, tree.merges[0].right), (0, 1));
        assert!((tree.merges[0].distance - 1.0).abs() < 1e-12);
        // ΔSSE({0,1},{10}) = 2·1/3 · 9.5² ⇒ distance sqrt(2 · that)
        let expected = (2.0 * (2.0 / 3.0) * 9.5f64.powi(2)).sqrt();
        assert!((tree.merges[1].distance - expected).abs() < 1e-12);
        let cut = cut_tree(&tree, 2).unwrap();
        assert_eq!(cut.labels, vec![0, 0, 1]);
    }

    #[test]
    fn duplicated_points_merge_at_zero() {
        let tree = agglomerative_ward(&line(&[2.5; 6])).unwrap();
        assert_eq!(tree.merges.len(), 5);
        assert!(tree.merges.iter().all(|m| m.distance == 0.0));
    }

    #[test]
    fn cut_extremes() {
        let tree = agglomerative_ward(&line(&[0.0, 3.0, 4.0, 9.0])).unwrap();
        assert_eq!(cut_tree(&tree, 1).unwrap().labels, vec![0; 4]);
        assert_eq!(cut_tree(&tree, 4).unwrap().labels, vec![0, 1, 2, 3]);
        assert!(cut_tree(&tree, 0).is_err());
        assert!(cut_tree(&tree, 5).is_err());
    }

    #[test]
    fn single_point_rejected() {
        assert!(agglomerative_ward(&line(&[1.0])).is_err());
    }

    #[test]
    fn every_id_is_a_child_once() {
        let tree = agglomerative_ward(&line(&[0.0, 0.5, 3.0, 7.0, 7.2, 20.0])).unwrap();
        let mut used: Vec<usize> = tree.merges.iter().flat_map(|m| [m.left, m.right]).collect();
        used.sort();
        assert_eq!(used, (0..2 * 6 - 2).collect::<Vec<_>>());
        assert_eq!(tree.node_members()[tree.root()], (0..6).collect::<Vec<_>>());
    }
}
