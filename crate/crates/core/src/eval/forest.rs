use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Features tried per split; `None` means `⌊√d⌋` (at least 1).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            max_features: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be positive"));
        }
        if self.max_features == Some(0) {
            return Err(Error::invalid("max_features must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class probabilities `[P(0), P(1)]`.
    Leaf { proba: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { proba } => return proba[1],
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub n_features: usize,
    pub seed: u64,
}

/// Gini impurity of a node holding `pos` positives among `n`.
pub fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Best split of `rows` on `feature`: `(threshold, weighted child impurity)`.
/// Thresholds are midpoints between consecutive distinct values.
pub fn best_split_on_feature(x: &Matrix, y: &[u8], rows: &[usize], feature: usize) -> Option<(f64, f64)> {
    let mut sorted: Vec<usize> = rows.to_vec();
    sorted.sort_by(|&a, &b| x[(a, feature)].total_cmp(&x[(b, feature)]));
    let n = sorted.len();
    let total_pos = sorted.iter().filter(|&&r| y[r] == 1).count();
    let mut left_pos = 0;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..n.saturating_sub(1) {
        left_pos += usize::from(y[sorted[k]] == 1);
        let (lo, hi) = (x[(sorted[k], feature)], x[(sorted[k + 1], feature)]);
        if lo == hi {
            continue;
        }
        let nl = k + 1;
        let nr = n - nl;
        let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
        let mut threshold = lo + (hi - lo) / 2.0;
        if threshold >= hi {
            threshold = lo;
        }
        if best.is_none_or(|(_, b)| impurity < b) {
            best = Some((threshold, impurity));
        }
    }
    best
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    max_depth: usize,
    max_features: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count() as f64;
        let p = if rows.is_empty() { 0.5 } else { pos / rows.len() as f64 };
        self.nodes.push(Node::Leaf { proba: [1.0 - p, p] });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: &[usize], depth: usize, rng: &mut Rng) -> usize {
        let pos = rows.iter().filter(|&&r| self.y[r] == 1).count();
        if depth >= self.max_depth || rows.len() < 2 || pos == 0 || pos == rows.len() {
            return self.leaf(rows);
        }
        let d = self.x.cols();
        let mut candidates: Vec<usize> = (0..d).collect();
        rng.shuffle(&mut candidates);
        let parent = gini(pos, rows.len());
        let mut best: Option<(usize, f64, f64)> = None;
        for &f in &candidates[..self.max_features] {
            if let Some((t, imp)) = best_split_on_feature(self.x, self.y, rows, f) {
                if imp < parent && best.is_none_or(|(_, _, b)| imp < b) {
                    best = Some((f, t, imp));
                }
            }
        }
        let Some((feature, threshold, _)) = best else {
            return self.leaf(rows);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { proba: [0.5, 0.5] });
        let left = self.build(&l, depth + 1, rng);
        let right = self.build(&r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

/// Grows one tree on the given rows (duplicates allowed).
pub fn train_tree(
    x: &Matrix,
    y: &[u8],
    rows: &[usize],
    max_depth: usize,
    max_features: usize,
    rng: &mut Rng,
) -> DecisionTree {
    let mut b = Builder {
        x,
        y,
        max_depth,
        max_features: max_features.clamp(1, x.cols()),
        nodes: Vec::new(),
    };
    b.build(rows, 0, rng);
    DecisionTree { nodes: b.nodes }
}

/// Each tree draws its bootstrap sample and feature subsets from its own
/// stream, `rng.derive_index("tree", t)`, so results do not depend on order.
pub fn forest_train(x: &Matrix, y: &[u8], config: &ForestConfig, rng: &Rng) -> Result<ForestModel> {
    config.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(Error::invalid(format!("{n} rows for {} labels", y.len())));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    for class in [0u8, 1] {
        if y.iter().filter(|&&l| l == class).count() < 2 {
            return Err(Error::invalid(format!(
                "forest needs at least 2 samples of class {class}"
            )));
        }
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("forest features".into()));
    }
    let d = x.cols();
    let m = config
        .max_features
        .unwrap_or(((d as f64).sqrt().floor() as usize).max(1));
    let trees = (0..config.n_trees)
        .map(|t| {
            let mut tr = rng.derive_index("tree", t as u64);
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| tr.below(n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree(x, y, &rows, config.max_depth, m, &mut tr)
        })
        .collect();
    Ok(ForestModel {
        trees,
        config: config.clone(),
        n_features: d,
        seed: rng.seed(),
    })
}

/// Mean positive-class leaf probability across trees.
pub fn forest_predict(model: &ForestModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_features {
        return Err(Error::invalid(format!(
            "forest trained on {} features, got {}",
            model.n_features,
            x.cols()
        )));
    }
    let k = model.trees.len() as f64;
    Ok(x.iter_rows()
        .map(|row| model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / k)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc_auc;

    #[test]
    fn separable_feature_gives_perfect_training_auc() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 - 19.5).collect();
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 0.0)).collect();
        let x = Matrix::from_vec(40, 1, xs).unwrap();
        let f = forest_train(&x, &y, &ForestConfig::default(), &Rng::new(0)).unwrap();
        let s = forest_predict(&f, &x).unwrap();
        assert_eq!(roc_auc(&s, &y).unwrap().auc, 1.0);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn depth_respected_and_leaves_normalized() {
        let mut rng = Rng::new(3);
        let x = Matrix::from_vec(200, 4, (0..800).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<u8> = (0..200).map(|_| u8::from(rng.bernoulli(0.5))).collect();
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 3,
            ..Default::default()
        };
        let f = forest_train(&x, &y, &cfg, &Rng::new(1)).unwrap();
        for t in &f.trees {
            assert!(t.depth() <= 3);
            for node in &t.nodes {
                if let Node::Leaf { proba } = node {
                    assert!((proba[0] + proba[1] - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_class_bootstrap_becomes_leaf() {
        let x = Matrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let t = train_tree(&x, &[1, 1, 0], &[0, 0, 1], 8, 1, &mut Rng::new(0));
        assert_eq!(t.nodes, vec![Node::Leaf { proba: [0.0, 1.0] }]);
    }

    #[test]
    fn too_few_per_class_is_an_error() {
        let x = Matrix::from_vec(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        assert!(forest_train(&x, &[1, 0, 0], &ForestConfig::default(), &Rng::new(0)).is_err());
    }
}
