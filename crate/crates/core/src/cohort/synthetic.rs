use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analysis::CodeSet;
use crate::cohort::io::parse_timestamp;
use crate::cohort::{default_feature_names, AdmissionRecord, PatientMatrix};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::Rng;

/// One planted Gaussian subcluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupSpec {
    pub name: String,
    pub class: u8,
    /// Share of the cohort; weights are normalized over all subgroups.
    pub weight: f64,
    /// Mean in standardized units, scaled by `class_separation`.
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Code prevalences overriding the background model for this subgroup.
    pub codes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_patients: usize,
    pub feature_names: Vec<String>,
    /// Multiplies every subgroup mean; 0 collapses all subgroups onto the same distribution.
    pub class_separation: f64,
    pub subgroups: Vec<SubgroupSpec>,
    /// Prevalence of each code outside subgroups that override it.
    pub background_codes: BTreeMap<String, f64>,
    pub missingness_rate: f64,
    /// Raw value = location + scale · standardized value.
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
    pub seed: u64,
}

/// Heart-failure code carried by every case.
pub const CASE_CODE: &str = "I50.9";

/// Codes planted per subgroup in the default preset, in subgroup order.
pub const PLANTED_CODES: [(&str, &str); 4] = [
    ("hf_dilated", "I42.0"),
    ("hf_congestive", "R18"),
    ("control_metabolic", "E78.0"),
    ("control_respiratory", "J44.9"),
];

/// Codes with one prevalence across the whole default cohort.
pub const NULL_CODES: [&str; 3] = ["I10", "K21.9", "Z87.891"];

const LOCATION: [f64; 13] = [
    130.0, 75.0, 85.0, 95.0, 36.8, 30.0, 95.0, 40.0, 250.0, 4.3, 138.0, 8.0, 9.0,
];
const SCALE: [f64; 13] = [20.0, 12.0, 15.0, 3.0, 0.6, 15.0, 30.0, 30.0, 70.0, 0.5, 4.0, 4.0, 3.0];

impl SyntheticSpec {
    /// Default desk-scale cohort: 2,000 patients over the 13 standard features.
    ///
    /// Features 0–8 are driven by three strong shared nuisance factors that
    /// dominate the variance; the first factor also splits every class into
    /// two halves, and the second carries a weak class shift. The label
    /// lives in features 9–12, whose variance is small by comparison: each
    /// heart-failure subgroup is a phenotype elevated on one pair of them.
    /// Every subgroup carries one planted code (0.8 inside vs 0.1 elsewhere).
    pub fn default_preset(seed: u64) -> Self {
        let d = 13;
        let mut cov = vec![vec![0.0; d]; d];
        for block in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    cov[3 * block + a][3 * block + b] = 2.25;
                }
            }
        }
        for (j, row) in cov.iter_mut().enumerate() {
            row[j] += if j < 9 { 0.25 } else { 1.0 };
        }
        let label_shift = 1.5;
        let nuisance_shift = 0.9;
        let split = 3.0;
        let mean = |g: usize| {
            let mut m = vec![0.0; d];
            let side = if g.is_multiple_of(2) { 1.0 } else { -1.0 };
            m[..3].fill(side * split);
            if g < 2 {
                m[3..6].fill(nuisance_shift);
                let phenotype = if g == 0 { 9..11 } else { 11..13 };
                m[phenotype].fill(label_shift);
            }
            m
        };
        let subgroups = PLANTED_CODES
            .iter()
            .enumerate()
            .map(|(g, &(name, code))| {
                let class = u8::from(g < 2);
                let mut codes = BTreeMap::new();
                codes.insert(code.to_string(), 0.8);
                if class == 1 {
                    codes.insert(CASE_CODE.to_string(), 1.0);
                }
                SubgroupSpec {
                    name: name.to_string(),
                    class,
                    weight: 0.25,
                    mean: mean(g),
                    covariance: cov.clone(),
                    codes,
                }
            })
            .collect();
        let mut background_codes: BTreeMap<String, f64> =
            PLANTED_CODES.iter().map(|&(_, c)| (c.to_string(), 0.1)).collect();
        background_codes.insert(CASE_CODE.to_string(), 0.0);
        for c in NULL_CODES {
            background_codes.insert(c.to_string(), 0.3);
        }
        Self {
            n_patients: 2000,
            feature_names: default_feature_names(),
            class_separation: 1.0,
            subgroups,
            background_codes,
            missingness_rate: 0.1,
            location: LOCATION.to_vec(),
            scale: SCALE.to_vec(),
            seed,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Every violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let d = self.n_features();
        let mut v = Vec::new();
        if self.n_patients == 0 {
            v.push("n_patients must be positive".into());
        }
        if d == 0 {
            v.push("at least one feature is required".into());
        }
        if self.location.len() != d || self.scale.len() != d {
            v.push(format!("location/scale must have {d} entries"));
        }
        if self.scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            v.push("scales must be positive and finite".into());
        }
        if !(0.0..1.0).contains(&self.missingness_rate) {
            v.push(format!(
                "missingness_rate must lie in [0, 1), got {}",
                self.missingness_rate
            ));
        }
        if !self.class_separation.is_finite() {
            v.push("class_separation must be finite".into());
        }
        if self.subgroups.is_empty() {
            v.push("at least one subgroup is required".into());
        }
        for class in [0u8, 1] {
            if !self.subgroups.iter().any(|g| g.class == class && g.weight > 0.0) {
                v.push(format!("no subgroup with positive weight for class {class}"));
            }
        }
        let prevalence_ok = |p: f64| (0.0..=1.0).contains(&p);
        for (c, &p) in &self.background_codes {
            if !prevalence_ok(p) {
                v.push(format!("background prevalence of {c} is {p}, outside [0, 1]"));
            }
        }
        for g in &self.subgroups {
            if g.class > 1 {
                v.push(format!("subgroup {}: class must be 0 or 1", g.name));
            }
            if !(g.weight >= 0.0 && g.weight.is_finite()) {
                v.push(format!("subgroup {}: weight must be non-negative", g.name));
            }
            if g.mean.len() != d {
                v.push(format!(
                    "subgroup {}: mean has {} entries, expected {d}",
                    g.name,
                    g.mean.len()
                ));
            }
            for (c, &p) in &g.codes {
                if !prevalence_ok(p) {
                    v.push(format!("subgroup {}: prevalence of {c} is {p}, outside [0, 1]", g.name));
                }
            }
            if let Err(e) = covariance_factor(&g.covariance, d) {
                v.push(format!("subgroup {}: {e}", g.name));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(v.join("; ")))
        }
    }
}

/// `S` with `S Sᵀ = Σ`, via the eigen-decomposition so singular PSD matrices work.
fn covariance_factor(cov: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(Error::invalid(format!("covariance must be {d}x{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let scale = m.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    for i in 0..d {
        for j in 0..i {
            if !m[(i, j)].is_finite() || (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::invalid("covariance is not symmetric"));
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::invalid("covariance is not positive semi-definite"));
    }
    let mut factor = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

/// Generated cohort: raw-unit features with missingness, plus demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohort {
    pub matrix: PatientMatrix,
    pub age: Vec<f64>,
    pub sex: Vec<u8>,
    pub subgroup_names: Vec<String>,
}

impl SyntheticCohort {
    /// One admission per patient with a single reading per present feature.
    pub fn to_admissions(&self) -> Vec<AdmissionRecord> {
        let m = &self.matrix;
        let base = parse_timestamp("2015-01-01T00:00:00").expect("constant timestamp");
        (0..m.n_patients())
            .map(|i| AdmissionRecord {
                patient_id: m.patient_ids[i].clone(),
                admission_id: format!("{}-a1", m.patient_ids[i]),
                timestamp: base + chrono::Duration::hours(i as i64),
                age: self.age[i],
                sex: self.sex[i],
                label: m.labels[i],
                measurements: m
                    .feature_names
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        (
                            f.clone(),
                            if m.present(i, j) {
                                vec![m.features[(i, j)]]
                            } else {
                                vec![]
                            },
                        )
                    })
                    .collect(),
                diagnosis_codes: m.codes[i].clone(),
            })
            .collect()
    }
}

/// Subgroup sizes by largest remainder so they sum to `n` exactly.
fn allocate(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let short = n - sizes.iter().sum::<usize>();
    for &g in order.iter().take(short) {
        sizes[g] += 1;
    }
    sizes
}

pub fn generate_synthetic_cohort(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let d = spec.n_features();
    let n = spec.n_patients;
    let root = Rng::new(spec.seed);
    let factors: Vec<DMatrix<f64>> = spec
        .subgroups
        .iter()
        .map(|g| covariance_factor(&g.covariance, d))
        .collect::<Result<_>>()?;

    let sizes = allocate(&spec.subgroups.iter().map(|g| g.weight).collect::<Vec<_>>(), n);
    let mut membership: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect();
    root.derive("order").shuffle(&mut membership);

    let mut feat_rng = root.derive("features");
    let mut code_rng = root.derive("codes");
    let mut miss_rng = root.derive("missingness");
    let mut demo_rng = root.derive("demographics");

    let all_codes: std::collections::BTreeSet<&String> = spec
        .background_codes
        .keys()
        .chain(spec.subgroups.iter().flat_map(|g| g.codes.keys()))
        .collect();

    let mut features = Matrix::zeros(n, d);
    let mut mask = vec![true; n * d];
    let mut codes = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut sex = Vec::with_capacity(n);
    for (i, &g) in membership.iter().enumerate() {
        let sg = &spec.subgroups[g];
        let eps: Vec<f64> = (0..d).map(|_| feat_rng.normal()).collect();
        for j in 0..d {
            let noise: f64 = (0..d).map(|k| factors[g][(j, k)] * eps[k]).sum();
            let z = spec.class_separation * sg.mean[j] + noise;
            features[(i, j)] = spec.location[j] + spec.scale[j] * z;
        }
        for j in 0..d {
            if miss_rng.bernoulli(spec.missingness_rate) {
                features[(i, j)] = 0.0;
                mask[i * d + j] = false;
            }
        }
        let mut set = CodeSet::new();
        for &c in &all_codes {
            let p = sg
                .codes
                .get(c)
                .or_else(|| spec.background_codes.get(c))
                .copied()
                .unwrap_or(0.0);
            if code_rng.bernoulli(p) {
                set.insert(c.clone());
            }
        }
        codes.push(set);
        age.push((72.0 + 10.0 * demo_rng.normal()).clamp(18.0, 100.0).round());
        sex.push(u8::from(demo_rng.bernoulli(0.5)));
    }
    let width = n.to_string().len();
    let mut matrix = PatientMatrix::new(
        (0..n).map(|i| format!("S{:0width$}", i + 1)).collect(),
        features,
        mask,
        membership.iter().map(|&g| spec.subgroups[g].class).collect(),
        spec.feature_names.clone(),
        codes,
    )?;
    matrix.subgroups = Some(membership);
    Ok(SyntheticCohort {
        matrix,
        age,
        sex,
        subgroup_names: spec.subgroups.iter().map(|g| g.name.clone()).collect(),
    })
}
