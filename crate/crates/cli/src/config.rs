use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dsec_core::analysis::HierarchyConfig;
use dsec_core::cohort::{default_feature_names, FilterThresholds, SplitSpec, SyntheticSpec};
use dsec_core::eval::ComparisonConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticOptions {
    pub n_patients: usize,
    pub class_separation: f64,
    pub missingness_rate: f64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        let preset = SyntheticSpec::default_preset(0);
        Self {
            n_patients: preset.n_patients,
            class_separation: preset.class_separation,
            missingness_rate: preset.missingness_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvOptions {
    /// Admission-level CSV; relative paths resolve against the working directory.
    pub path: PathBuf,
    #[serde(default = "default_feature_names")]
    pub measurement_columns: Vec<String>,
    /// Match every case to one control on age and sex before aggregation.
    #[serde(default = "yes")]
    pub propensity_match: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticOptions),
    Csv(CsvOptions),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOptions {
    pub test_fraction: f64,
    pub n_folds: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            test_fraction: s.test_fraction,
            n_folds: s.n_folds,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationOptions {
    /// Also retrain and score every method on each training fold.
    pub cross_validate: bool,
}

/// Everything that determines a run's results. The output directory is
/// deliberately not part of it, so relocated runs share a fingerprint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSource,
    pub filter: FilterThresholds,
    pub split: SplitOptions,
    pub model: ComparisonConfig,
    pub enrichment: HierarchyConfig,
    pub evaluation: EvaluationOptions,
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub depth: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(k) = o.k {
            self.model.k = k;
        }
        if let Some(depth) = o.depth {
            self.enrichment.depth = depth;
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.split.test_fraction,
            n_folds: self.split.n_folds,
            seed: self.seed,
        }
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match &self.data {
            DataSource::Synthetic(o) => Some(SyntheticSpec {
                n_patients: o.n_patients,
                class_separation: o.class_separation,
                missingness_rate: o.missingness_rate,
                ..SyntheticSpec::default_preset(self.seed)
            }),
            DataSource::Csv(_) => None,
        }
    }

    /// Every problem with the config, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match &self.data {
            DataSource::Synthetic(_) => {
                let spec = self.synthetic_spec().expect("synthetic source");
                v.extend(spec.violations().into_iter().map(|m| format!("data.synthetic: {m}")));
            }
            DataSource::Csv(o) => {
                if o.measurement_columns.is_empty() {
                    v.push("data.csv.measurement_columns: at least one column is required".into());
                }
            }
        }
        for (name, value) in [
            ("filter.min_feature_presence", self.filter.min_feature_presence),
            ("filter.min_case_coverage", self.filter.min_case_coverage),
        ] {
            if !(0.0..1.0).contains(&value) {
                v.push(format!("{name}: must lie in [0, 1), got {value}"));
            }
        }
        if let Err(e) = self.split_spec().validate() {
            v.push(format!("split: {e}"));
        }
        let m = &self.model;
        for method in [dsec_core::model::Method::Dsec, dsec_core::model::Method::Dec] {
            if let Err(e) = m.encoder_spec(method).validate() {
                v.push(format!("model.layer_sizes: {e}"));
                break;
            }
        }
        if let Err(e) = m.schedule.validate() {
            v.push(format!("model.schedule: {e}"));
        }
        if m.k < 2 {
            v.push(format!("model.k: clustering needs k >= 2, got {}", m.k));
        }
        if let Err(e) = m.forest.validate() {
            v.push(format!("model.forest: {e}"));
        }
        let inputs = m.layer_sizes.first().copied().unwrap_or(0);
        if m.pca_dims == 0 || m.pca_dims > inputs {
            v.push(format!("model.pca_dims: must lie in [1, {inputs}], got {}", m.pca_dims));
        }
        let e = &self.enrichment;
        if !(e.alpha > 0.0 && e.alpha < 1.0) {
            v.push(format!("enrichment.alpha: must lie in (0, 1), got {}", e.alpha));
        }
        if e.depth == 0 {
            v.push("enrichment.depth: must be at least 1".into());
        }
        if e.min_cluster_size == 0 {
            v.push("enrichment.min_cluster_size: must be at least 1".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if !v.is_empty() {
            bail!("invalid configuration:\n  - {}", v.join("\n  - "));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
