//! Cohort ingestion, preprocessing, matching, splitting and synthetic generation.

mod aggregate;
mod filter;
pub mod io;
mod prepare;
mod propensity;
mod split;
mod standardize;
mod synthetic;
mod types;

pub use aggregate::aggregate_and_select;
pub use filter::{filter_features_and_cases, FilterReport, FilterThresholds};
pub use io::{
    load_admissions, load_patient_matrix, read_admissions, read_patient_matrix, save_admissions, save_patient_matrix,
    write_admissions, write_patient_matrix, AdmissionSchema, LoadReport, RowError,
};
pub use prepare::{prepare_cohort, PreparedCohort};
pub use propensity::{fit_propensity, match_cohort, propensity_match, MatchReport, PropensityModel};
pub use split::{stratified_split, Split, SplitSpec};
pub use standardize::{impute_and_standardize, Standardizer};
pub use synthetic::{
    generate_synthetic_cohort, SubgroupSpec, SyntheticCohort, SyntheticSpec, CASE_CODE, NULL_CODES, PLANTED_CODES,
};
pub use types::{default_feature_names, AdmissionRecord, PatientMatrix, FEATURE_NAMES, HEART_FAILURE_PREFIX};
