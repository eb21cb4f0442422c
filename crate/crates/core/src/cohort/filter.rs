use serde::{Deserialize, Serialize};

use crate::cohort::PatientMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    /// A feature is kept only if present in strictly more than this fraction of patients.
    pub min_feature_presence: f64,
    /// A patient is dropped if strictly less than this fraction of the kept features is present.
    pub min_case_coverage: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_feature_presence: 0.6,
            min_case_coverage: 0.6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub dropped_features: Vec<String>,
    pub dropped_patients: Vec<String>,
}

/// Feature filter first, then the case filter on the surviving features.
pub fn filter_features_and_cases(
    matrix: &PatientMatrix,
    thresholds: &FilterThresholds,
) -> Result<(PatientMatrix, FilterReport)> {
    let (n, d) = matrix.features.shape();
    let mut report = FilterReport::default();
    if n == 0 {
        return Ok((matrix.clone(), report));
    }
    let mut keep_cols = Vec::new();
    for j in 0..d {
        let present = (0..n).filter(|&i| matrix.present(i, j)).count();
        if present as f64 / n as f64 > thresholds.min_feature_presence {
            keep_cols.push(j);
        } else {
            report.dropped_features.push(matrix.feature_names[j].clone());
        }
    }
    if keep_cols.is_empty() {
        return Err(Error::Data("every feature fell below the presence threshold".into()));
    }
    let by_feature = matrix.select_features(&keep_cols);
    let kept = keep_cols.len() as f64;
    let mut keep_rows = Vec::new();
    for i in 0..n {
        let present = (0..keep_cols.len()).filter(|&j| by_feature.present(i, j)).count();
        if present as f64 / kept < thresholds.min_case_coverage {
            report.dropped_patients.push(matrix.patient_ids[i].clone());
        } else {
            keep_rows.push(i);
        }
    }
    Ok((by_feature.select_rows(&keep_rows), report))
}
