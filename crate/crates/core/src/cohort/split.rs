use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.25,
            n_folds: 5,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.n_folds < 2 {
            return Err(Error::invalid(format!(
                "n_folds must be at least 2, got {}",
                self.n_folds
            )));
        }
        Ok(())
    }
}

/// Row indices of a stratified hold-out split plus stratified folds over the
/// training rows. All index lists are sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

impl Split {
    /// `(fit rows, validation rows)` for each fold.
    pub fn fold_pairs(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> + '_ {
        (0..self.folds.len()).map(move |k| {
            let fit = self
                .folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            (fit, self.folds[k].clone())
        })
    }
}

/// Per class, `round(n_c · test_fraction)` rows go to the test set; the rest
/// are dealt round-robin into folds after shuffling.
pub fn stratified_split(labels: &[u8], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed).derive("split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut folds = vec![Vec::new(); spec.n_folds];
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            return Err(Error::Data(format!("class {class} has no members")));
        }
        let n_test = (members.len() as f64 * spec.test_fraction).round() as usize;
        if members.len() - n_test < spec.n_folds {
            return Err(Error::Data(format!(
                "class {class} has {} training members, fewer than {} folds",
                members.len() - n_test,
                spec.n_folds
            )));
        }
        rng.shuffle(&mut members);
        test.extend_from_slice(&members[..n_test]);
        for (k, &i) in members[n_test..].iter().enumerate() {
            train.push(i);
            folds[k % spec.n_folds].push(i);
        }
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Data(format!("label of row {i} is not binary")));
    }
    train.sort_unstable();
    test.sort_unstable();
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(Split { train, test, folds })
}
