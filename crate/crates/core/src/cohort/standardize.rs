use serde::{Deserialize, Serialize};

use crate::cohort::PatientMatrix;
use crate::error::{Error, Result};

/// Mean imputation and z-scoring with statistics from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Mean of the observed training values per feature.
    pub means: Vec<f64>,
    /// Population standard deviation of the imputed training column.
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &PatientMatrix) -> Result<Self> {
        let (n, d) = train.features.shape();
        let mut means = Vec::with_capacity(d);
        let mut stds = Vec::with_capacity(d);
        for j in 0..d {
            let observed: Vec<f64> = (0..n)
                .filter(|&i| train.present(i, j))
                .map(|i| train.features[(i, j)])
                .collect();
            if observed.is_empty() {
                return Err(Error::Data(format!(
                    "feature {} has no observed training values",
                    train.feature_names[j]
                )));
            }
            let mean = observed.iter().sum::<f64>() / observed.len() as f64;
            // imputed cells sit at the mean and add nothing to the sum of squares
            let ss: f64 = observed.iter().map(|v| (v - mean) * (v - mean)).sum();
            let std = (ss / n as f64).sqrt();
            if std == 0.0 {
                log::warn!(
                    "feature {} has zero training variance; it standardizes to 0",
                    train.feature_names[j]
                );
            }
            means.push(mean);
            stds.push(std);
        }
        Ok(Self { means, stds })
    }

    /// Imputes missing cells with the training mean, then z-scores. The mask is kept.
    pub fn transform(&self, m: &PatientMatrix) -> Result<PatientMatrix> {
        if m.n_features() != self.means.len() {
            return Err(Error::Data(format!(
                "standardizer fitted on {} features, matrix has {}",
                self.means.len(),
                m.n_features()
            )));
        }
        let mut out = m.clone();
        for i in 0..m.n_patients() {
            for j in 0..m.n_features() {
                let raw = if m.present(i, j) {
                    m.features[(i, j)]
                } else {
                    self.means[j]
                };
                out.features[(i, j)] = if self.stds[j] > 0.0 {
                    (raw - self.means[j]) / self.stds[j]
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

/// Fits on `train` and transforms both sets.
pub fn impute_and_standardize(
    train: &PatientMatrix,
    test: &PatientMatrix,
) -> Result<(PatientMatrix, PatientMatrix, Standardizer)> {
    let st = Standardizer::fit(train)?;
    Ok((st.transform(train)?, st.transform(test)?, st))
}
