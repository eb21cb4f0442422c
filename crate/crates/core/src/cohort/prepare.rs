use serde::{Deserialize, Serialize};

use crate::cohort::{
    filter_features_and_cases, impute_and_standardize, stratified_split, FilterReport, FilterThresholds, PatientMatrix,
    Split, SplitSpec, Standardizer,
};
use crate::error::Result;

/// A filtered cohort split into standardized train and test matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedCohort {
    /// Every filtered patient, transformed with the training statistics.
    pub all: PatientMatrix,
    pub train: PatientMatrix,
    pub test: PatientMatrix,
    /// Row indices refer to the filtered matrix.
    pub split: Split,
    pub standardizer: Standardizer,
    pub filter: FilterReport,
}

impl PreparedCohort {
    /// Folds re-expressed as row indices into `train`.
    pub fn train_folds(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let pos = |i: &usize| self.split.train.binary_search(i).expect("fold row is a training row");
        self.split
            .fold_pairs()
            .map(|(fit, val)| (fit.iter().map(pos).collect(), val.iter().map(pos).collect()))
            .collect()
    }
}

/// Filter, stratified split, then imputation and standardization fitted on the training rows.
pub fn prepare_cohort(
    matrix: &PatientMatrix,
    thresholds: &FilterThresholds,
    split: &SplitSpec,
) -> Result<PreparedCohort> {
    let (filtered, filter) = filter_features_and_cases(matrix, thresholds)?;
    let split = stratified_split(&filtered.labels, split)?;
    let (train, test, standardizer) =
        impute_and_standardize(&filtered.select_rows(&split.train), &filtered.select_rows(&split.test))?;
    let all = standardizer.transform(&filtered)?;
    Ok(PreparedCohort {
        all,
        train,
        test,
        split,
        standardizer,
        filter,
    })
}
