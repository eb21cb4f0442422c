use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::analysis::CodeSet;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// The thirteen vital-sign and laboratory features, in column order.
pub const FEATURE_NAMES: [&str; 13] = [
    "systolic_bp",
    "diastolic_bp",
    "heart_rate",
    "spo2",
    "temperature",
    "alt",
    "creatinine",
    "crp",
    "platelets",
    "potassium",
    "sodium",
    "urea",
    "wbc",
];

pub fn default_feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Prefix of the heart-failure diagnosis codes.
pub const HEART_FAILURE_PREFIX: &str = "I50";

/// One hospital admission. Each measurement holds every reading taken during
/// the admission; an empty list means the measurement is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub patient_id: String,
    pub admission_id: String,
    pub timestamp: NaiveDateTime,
    pub age: f64,
    pub sex: u8,
    pub label: u8,
    pub measurements: BTreeMap<String, Vec<f64>>,
    pub diagnosis_codes: CodeSet,
}

impl AdmissionRecord {
    pub fn present_count(&self, features: &[String]) -> usize {
        features
            .iter()
            .filter(|f| self.measurements.get(*f).is_some_and(|v| !v.is_empty()))
            .count()
    }

    pub fn has_heart_failure_code(&self) -> bool {
        self.diagnosis_codes.iter().any(|c| c.starts_with(HEART_FAILURE_PREFIX))
    }

    /// Mean of the readings for `feature`, if any.
    pub fn mean(&self, feature: &str) -> Option<f64> {
        let v = self.measurements.get(feature)?;
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    }
}

/// Row-per-patient feature matrix with presence mask, labels and code sets.
/// Missing cells hold `0.0` in `features` and `false` in `mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientMatrix {
    pub patient_ids: Vec<String>,
    pub features: Matrix,
    /// Row-major, congruent with `features`.
    pub mask: Vec<bool>,
    /// 1 = heart failure.
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub codes: Vec<CodeSet>,
    /// Planted subgroup per patient, for synthetic cohorts.
    pub subgroups: Option<Vec<usize>>,
}

impl PatientMatrix {
    pub fn new(
        patient_ids: Vec<String>,
        features: Matrix,
        mask: Vec<bool>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        codes: Vec<CodeSet>,
    ) -> Result<Self> {
        let pm = Self {
            patient_ids,
            features,
            mask,
            labels,
            feature_names,
            codes,
            subgroups: None,
        };
        pm.validate()?;
        Ok(pm)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.features.shape();
        if self.mask.len() != n * d {
            return Err(Error::Data(format!(
                "mask has {} cells for a {n}x{d} matrix",
                self.mask.len()
            )));
        }
        if self.feature_names.len() != d {
            return Err(Error::Data(format!(
                "{} feature names for {d} columns",
                self.feature_names.len()
            )));
        }
        if self.patient_ids.len() != n || self.labels.len() != n || self.codes.len() != n {
            return Err(Error::Data("per-patient vectors disagree with the row count".into()));
        }
        if self.subgroups.as_ref().is_some_and(|s| s.len() != n) {
            return Err(Error::Data("subgroup vector disagrees with the row count".into()));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("label of row {i} is not binary")));
        }
        if !self.features.is_finite() {
            return Err(Error::Data("feature matrix contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn n_patients(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn present(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n_features() + j]
    }

    pub fn is_dense(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn select_rows(&self, idx: &[usize]) -> PatientMatrix {
        let d = self.n_features();
        PatientMatrix {
            patient_ids: idx.iter().map(|&i| self.patient_ids[i].clone()).collect(),
            features: self.features.select_rows(idx),
            mask: idx
                .iter()
                .flat_map(|&i| self.mask[i * d..(i + 1) * d].iter().copied())
                .collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            codes: idx.iter().map(|&i| self.codes[i].clone()).collect(),
            subgroups: self.subgroups.as_ref().map(|s| idx.iter().map(|&i| s[i]).collect()),
        }
    }

    pub fn select_features(&self, cols: &[usize]) -> PatientMatrix {
        let d = self.n_features();
        let n = self.n_patients();
        PatientMatrix {
            patient_ids: self.patient_ids.clone(),
            features: self.features.select_cols(cols),
            mask: (0..n)
                .flat_map(|i| cols.iter().map(move |&j| self.mask[i * d + j]))
                .collect(),
            labels: self.labels.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            codes: self.codes.clone(),
            subgroups: self.subgroups.clone(),
        }
    }

    /// Builds a matrix from per-patient aggregated admissions, one column per feature.
    pub fn from_admissions(records: &[AdmissionRecord], feature_names: &[String]) -> Result<Self> {
        let d = feature_names.len();
        let mut features = Matrix::zeros(records.len(), d);
        let mut mask = vec![false; records.len() * d];
        for (i, r) in records.iter().enumerate() {
            for (j, f) in feature_names.iter().enumerate() {
                if let Some(v) = r.mean(f) {
                    if !v.is_finite() {
                        return Err(Error::Data(format!("patient {}: non-finite {f}", r.patient_id)));
                    }
                    features[(i, j)] = v;
                    mask[i * d + j] = true;
                }
            }
        }
        PatientMatrix::new(
            records.iter().map(|r| r.patient_id.clone()).collect(),
            features,
            mask,
            records.iter().map(|r| r.label).collect(),
            feature_names.to_vec(),
            records.iter().map(|r| r.diagnosis_codes.clone()).collect(),
        )
    }
}
