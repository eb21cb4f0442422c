//! Scores a hierarchy report against the subgroups planted in a synthetic cohort.

use serde::{Deserialize, Serialize};

use crate::analysis::{HierarchyReport, Side};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedHit {
    pub subgroup: usize,
    pub code: String,
    /// Comparison label where the code was first recovered.
    pub comparison: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub planted: Vec<PlantedHit>,
    /// `(code, comparison)` for every significant null code.
    pub null_hits: Vec<(String, String)>,
}

impl RecoveryReport {
    pub fn all_recovered(&self) -> bool {
        self.planted.iter().all(|h| h.comparison.is_some())
    }

    pub fn nulls_clean(&self) -> bool {
        self.null_hits.is_empty()
    }
}

/// A planted code counts as recovered when some comparison flags it as
/// significantly enriched on a side that holds at least half of the planted
/// subgroup and where that subgroup is more concentrated than on the other
/// side. `subgroups[i]` is the planted subgroup of leaf `i`.
pub fn score_recovery(
    report: &HierarchyReport,
    subgroups: &[usize],
    planted: &[(usize, &str)],
    null_codes: &[&str],
) -> RecoveryReport {
    let planted = planted
        .iter()
        .map(|&(g, code)| {
            let total = subgroups.iter().filter(|&&x| x == g).count() as f64;
            let comparison = report.comparisons.iter().find_map(|cmp| {
                let r = cmp.records.iter().find(|r| r.code == code && r.significant)?;
                let (mine, other) = match r.enriched_in? {
                    Side::A => (&cmp.members_a, &cmp.members_b),
                    Side::B => (&cmp.members_b, &cmp.members_a),
                };
                let count = |v: &[usize]| v.iter().filter(|&&i| subgroups[i] == g).count() as f64;
                let holds_half = count(mine) >= 0.5 * total;
                let concentrated = count(mine) / mine.len() as f64 > count(other) / other.len() as f64;
                (holds_half && concentrated).then(|| cmp.label())
            });
            PlantedHit {
                subgroup: g,
                code: code.to_string(),
                comparison,
            }
        })
        .collect();
    let null_hits = report
        .comparisons
        .iter()
        .flat_map(|cmp| {
            cmp.records
                .iter()
                .filter(|r| r.significant && null_codes.contains(&r.code.as_str()))
                .map(move |r| (r.code.clone(), cmp.label()))
        })
        .collect();
    RecoveryReport { planted, null_hits }
}
