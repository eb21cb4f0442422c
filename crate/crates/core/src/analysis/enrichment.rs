//! Per-code enrichment between two patient clusters, and the per-merge
//! report over a Ward hierarchy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{fisher_exact, ContingencyTable, LinkageTree};
use crate::error::{Error, Result};

pub type CodeSet = BTreeSet<String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub code: String,
    pub table: ContingencyTable,
    pub odds_ratio: f64,
    /// Positive when the code is more frequent in cluster A.
    pub log_odds: f64,
    pub p_value: f64,
    /// `min(1, p_value · tests)`.
    pub p_adjusted: f64,
    /// `None` when the log odds are exactly zero.
    pub enriched_in: Option<Side>,
    pub significant: bool,
}

fn count_codes<'a>(group: &[&'a CodeSet]) -> BTreeMap<&'a str, u64> {
    let mut m: BTreeMap<&str, u64> = BTreeMap::new();
    for set in group {
        for c in set.iter() {
            *m.entry(c.as_str()).or_default() += 1;
        }
    }
    m
}

/// One Fisher test per distinct code seen in either cluster, Bonferroni
/// corrected over the codes of this comparison. Records are sorted by
/// decreasing `|log_odds|`, ties by code.
pub fn enrich_pairwise(codes_a: &[&CodeSet], codes_b: &[&CodeSet], alpha: f64) -> Result<Vec<EnrichmentRecord>> {
    if codes_a.is_empty() || codes_b.is_empty() {
        return Err(Error::invalid("enrichment needs two non-empty clusters"));
    }
    let in_a = count_codes(codes_a);
    let in_b = count_codes(codes_b);
    let codes: BTreeSet<&str> = in_a.keys().chain(in_b.keys()).copied().collect();
    let n_tests = codes.len() as f64;
    let (na, nb) = (codes_a.len() as u64, codes_b.len() as u64);

    let mut records = Vec::with_capacity(codes.len());
    for code in codes {
        let a = in_a.get(code).copied().unwrap_or(0);
        let c = in_b.get(code).copied().unwrap_or(0);
        let table = ContingencyTable::new(a, na - a, c, nb - c);
        let (odds_ratio, p_value) = fisher_exact(&table)?;
        let log_odds = odds_ratio.ln();
        let p_adjusted = (p_value * n_tests).min(1.0);
        records.push(EnrichmentRecord {
            code: code.to_string(),
            table,
            odds_ratio,
            log_odds,
            p_value,
            p_adjusted,
            enriched_in: if log_odds > 0.0 {
                Some(Side::A)
            } else if log_odds < 0.0 {
                Some(Side::B)
            } else {
                None
            },
            significant: p_adjusted < alpha,
        });
    }
    records.sort_by(|x, y| {
        y.log_odds
            .abs()
            .total_cmp(&x.log_odds.abs())
            .then_with(|| x.code.cmp(&y.code))
    });
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub alpha: f64,
    /// Number of merge levels reported below the root.
    pub depth: usize,
    pub min_cluster_size: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            depth: 4,
            min_cluster_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeComparison {
    /// Dotted group path of side A, e.g. `"2.1"`.
    pub group_a: String,
    pub group_b: String,
    /// Node id of the merged cluster in the linkage tree.
    pub node: usize,
    pub depth: usize,
    pub members_a: Vec<usize>,
    pub members_b: Vec<usize>,
    pub records: Vec<EnrichmentRecord>,
}

impl MergeComparison {
    pub fn label(&self) -> String {
        format!("{} vs {}", self.group_a, self.group_b)
    }

    pub fn group_of(&self, side: Side) -> &str {
        match side {
            Side::A => &self.group_a,
            Side::B => &self.group_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedMerge {
    pub group_a: String,
    pub group_b: String,
    pub size_a: usize,
    pub size_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub comparisons: Vec<MergeComparison>,
    pub skipped: Vec<SkippedMerge>,
}

fn child_path(parent: &str, idx: usize) -> String {
    if parent.is_empty() {
        idx.to_string()
    } else {
        format!("{parent}.{idx}")
    }
}

/// Walks the tree from the root. The two children of the node at path `p`
/// become `p.1` (lower node id) and `p.2`; the root's children are `1` and `2`.
/// Comparisons are emitted breadth-first to `config.depth` levels; merges with
/// a side smaller than `min_cluster_size` are skipped but their subtrees are
/// still visited.
pub fn hierarchical_enrichment(
    tree: &LinkageTree,
    codes: &[CodeSet],
    config: &HierarchyConfig,
) -> Result<HierarchyReport> {
    if codes.len() != tree.leaf_count {
        return Err(Error::invalid(format!(
            "{} code sets for {} leaves",
            codes.len(),
            tree.leaf_count
        )));
    }
    let members = tree.node_members();
    let mut comparisons = Vec::new();
    let mut skipped = Vec::new();
    let mut frontier = vec![(tree.root(), String::new())];
    for depth in 1..=config.depth {
        let mut next = Vec::new();
        for (node, path) in frontier {
            let Some((left, right)) = tree.children(node) else {
                continue;
            };
            let (ga, gb) = (child_path(&path, 1), child_path(&path, 2));
            let (ma, mb) = (&members[left], &members[right]);
            if ma.len() < config.min_cluster_size || mb.len() < config.min_cluster_size {
                skipped.push(SkippedMerge {
                    group_a: ga.clone(),
                    group_b: gb.clone(),
                    size_a: ma.len(),
                    size_b: mb.len(),
                });
            } else {
                let sets_a: Vec<&CodeSet> = ma.iter().map(|&i| &codes[i]).collect();
                let sets_b: Vec<&CodeSet> = mb.iter().map(|&i| &codes[i]).collect();
                let records = enrich_pairwise(&sets_a, &sets_b, config.alpha)?;
                comparisons.push(MergeComparison {
                    group_a: ga.clone(),
                    group_b: gb.clone(),
                    node,
                    depth,
                    members_a: ma.clone(),
                    members_b: mb.clone(),
                    records,
                });
            }
            next.push((left, ga));
            next.push((right, gb));
        }
        frontier = next;
    }
    Ok(HierarchyReport { comparisons, skipped })
}

/// Group path of every leaf after descending `depth` levels from the root,
/// with the same naming as [`hierarchical_enrichment`]. Leaves that become
/// singletons earlier keep the path where they split off.
pub fn hierarchy_groups(tree: &LinkageTree, depth: usize) -> Vec<String> {
    let members = tree.node_members();
    let mut out = vec![String::new(); tree.leaf_count];
    let mut frontier = vec![(tree.root(), String::new())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (node, path) in frontier {
            match tree.children(node) {
                Some((left, right)) => {
                    next.push((left, child_path(&path, 1)));
                    next.push((right, child_path(&path, 2)));
                }
                None => next.push((node, path)),
            }
        }
        frontier = next;
    }
    for (node, path) in frontier {
        for &leaf in &members[node] {
            out[leaf] = path.clone();
        }
    }
    out
}

impl HierarchyReport {
    /// CSV with header `group_path,code,log_odds,p_value,p_adjusted,enriched_in`.
    /// `group_path` names the comparison (`"2.1 vs 2.2"`), `enriched_in` the
    /// group the code is more frequent in.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group_path,code,log_odds,p_value,p_adjusted,enriched_in\n");
        for cmp in &self.comparisons {
            for r in &cmp.records {
                let side = r.enriched_in.map_or("", |s| cmp.group_of(s));
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    cmp.label(),
                    csv_field(&r.code),
                    r.log_odds,
                    r.p_value,
                    r.p_adjusted,
                    side
                );
            }
        }
        out
    }

    /// Two-column table of significant codes per group, mirroring the layout
    /// "Group | Enriched codes (log odds)".
    pub fn to_table(&self) -> String {
        let mut by_group: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for cmp in &self.comparisons {
            by_group.entry(cmp.group_a.clone()).or_default();
            by_group.entry(cmp.group_b.clone()).or_default();
            for r in cmp.records.iter().filter(|r| r.significant) {
                if let Some(side) = r.enriched_in {
                    by_group
                        .entry(cmp.group_of(side).to_string())
                        .or_default()
                        .push((r.code.clone(), r.log_odds.abs()));
                }
            }
        }
        let mut groups: Vec<_> = by_group.into_iter().collect();
        groups.sort_by(|a, b| group_order(&a.0, &b.0));
        let width = groups.iter().map(|(g, _)| g.len()).max().unwrap_or(5).max(5);
        let rule = "-".repeat(width + 40);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  Enriched codes (log odds)", "Group");
        let _ = writeln!(out, "{rule}");
        for (group, codes) in groups {
            if codes.is_empty() {
                let _ = writeln!(out, "{group:<width$}");
            }
            for (i, (code, lo)) in codes.iter().enumerate() {
                let g = if i == 0 { group.as_str() } else { "" };
                let _ = writeln!(out, "{g:<width$}  {code} ({lo:.2})");
            }
            let _ = writeln!(out, "{rule}");
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Orders dotted paths by depth, then numerically component-wise.
fn group_order(a: &str, b: &str) -> std::cmp::Ordering {
    let parse = |s: &str| s.split('.').map(|p| p.parse::<u64>().unwrap_or(0)).collect::<Vec<_>>();
    let (pa, pb) = (parse(a), parse(b));
    pa.len().cmp(&pb.len()).then(pa.cmp(&pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::agglomerative_ward;
    use crate::nn::Matrix;

    fn set(codes: &[&str]) -> CodeSet {
        codes.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_distributions_are_not_significant() {
        let a: Vec<CodeSet> = (0..40)
            .map(|i| if i % 2 == 0 { set(&["X"]) } else { set(&["Y"]) })
            .collect();
        let ra: Vec<&CodeSet> = a.iter().collect();
        let recs = enrich_pairwise(&ra, &ra, 0.05).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| !r.significant && r.p_value == 1.0));
    }

    #[test]
    fn planted_code_is_enriched_in_a() {
        let a: Vec<CodeSet> = (0..100).map(|i| if i < 80 { set(&["X"]) } else { set(&[]) }).collect();
        let b: Vec<CodeSet> = (0..100).map(|i| if i < 10 { set(&["X"]) } else { set(&[]) }).collect();
        let recs = enrich_pairwise(&a.iter().collect::<Vec<_>>(), &b.iter().collect::<Vec<_>>(), 0.05).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.table, ContingencyTable::new(80, 20, 10, 90));
        let (or, p) = fisher_exact(&r.table).unwrap();
        assert_eq!((r.odds_ratio, r.p_value), (or, p));
        assert!((r.log_odds - 36f64.ln()).abs() < 1e-12);
        assert!(r.significant);
        assert_eq!(r.enriched_in, Some(Side::A));
    }

    #[test]
    fn empty_cluster_rejected() {
        let a = [set(&["X"])];
        assert!(enrich_pairwise(&[], &a.iter().collect::<Vec<_>>(), 0.05).is_err());
    }

    #[test]
    fn two_leaf_tree_has_one_comparison() {
        let pts = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let tree = agglomerative_ward(&pts).unwrap();
        let cfg = HierarchyConfig {
            min_cluster_size: 1,
            ..HierarchyConfig::default()
        };
        let rep = hierarchical_enrichment(&tree, &[set(&["A"]), set(&["B"])], &cfg).unwrap();
        assert_eq!(rep.comparisons.len(), 1);
        assert_eq!(rep.comparisons[0].label(), "1 vs 2");
    }

    #[test]
    fn group_paths_are_dotted() {
        let pts = Matrix::from_rows(&(0..16).map(|i| vec![(i as f64).powi(2)]).collect::<Vec<_>>()).unwrap();
        let tree = agglomerative_ward(&pts).unwrap();
        let codes: Vec<CodeSet> = (0..16).map(|_| set(&["Z"])).collect();
        let cfg = HierarchyConfig {
            min_cluster_size: 1,
            depth: 3,
            alpha: 0.05,
        };
        let rep = hierarchical_enrichment(&tree, &codes, &cfg).unwrap();
        let labels: Vec<String> = rep.comparisons.iter().map(MergeComparison::label).collect();
        assert_eq!(labels[0], "1 vs 2");
        for c in &rep.comparisons[1..] {
            let parent = c.group_a.rsplit_once('.').unwrap().0;
            assert_eq!(c.group_b, format!("{parent}.2"));
            assert!(c.group_a.ends_with(".1"));
        }
        assert!(labels.iter().any(|l| l.split('.').count() >= 3), "{labels:?}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let pts = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let tree = agglomerative_ward(&pts).unwrap();
        let cfg = HierarchyConfig {
            min_cluster_size: 1,
            ..HierarchyConfig::default()
        };
        let rep = hierarchical_enrichment(&tree, &[set(&["A"]), set(&["B"])], &cfg).unwrap();
        let csv = rep.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "group_path,code,log_odds,p_value,p_adjusted,enriched_in");
        assert_eq!(lines.len(), 3);
        assert!(rep.to_table().contains("Group"));
    }
}
