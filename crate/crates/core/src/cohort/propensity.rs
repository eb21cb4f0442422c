use serde::{Deserialize, Serialize};

use crate::cohort::AdmissionRecord;
use crate::error::{Error, Result};
use crate::model::softmax_bce_from_logits;
use crate::nn::{softmax_rows, Activation, AdamConfig, AdamState, DenseLayer, Matrix};
use crate::rng::Rng;

const FIT_STEPS: usize = 500;

/// Logistic model of case membership on standardized age and sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub age_mean: f64,
    pub age_std: f64,
    pub layer: DenseLayer,
}

impl PropensityModel {
    fn covariates(&self, records: &[&AdmissionRecord]) -> Matrix {
        let mut m = Matrix::zeros(records.len(), 2);
        for (i, r) in records.iter().enumerate() {
            m[(i, 0)] = (r.age - self.age_mean) / self.age_std;
            m[(i, 1)] = r.sex as f64;
        }
        m
    }

    /// Estimated probability of being a case.
    pub fn score(&self, records: &[&AdmissionRecord]) -> Result<Vec<f64>> {
        let logits = self.layer.pre_activation(&self.covariates(records))?;
        let p = softmax_rows(&logits);
        Ok((0..p.rows()).map(|i| p[(i, 1)]).collect())
    }
}

/// Full-batch Adam fit of the case indicator on age and sex.
pub fn fit_propensity(cases: &[&AdmissionRecord], controls: &[&AdmissionRecord]) -> Result<PropensityModel> {
    let all: Vec<&AdmissionRecord> = cases.iter().chain(controls).copied().collect();
    let n = all.len() as f64;
    let age_mean = all.iter().map(|r| r.age).sum::<f64>() / n;
    let var = all.iter().map(|r| (r.age - age_mean).powi(2)).sum::<f64>() / n;
    let age_std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let layer = DenseLayer::new(Matrix::zeros(2, 2), vec![0.0; 2], Activation::Softmax)?;
    let mut model = PropensityModel {
        age_mean,
        age_std,
        layer,
    };
    let x = model.covariates(&all);
    let y: Vec<u8> = (0..all.len()).map(|i| u8::from(i < cases.len())).collect();
    let mut adam = AdamState::new(AdamConfig::default(), &[4, 2])?;
    for _ in 0..FIT_STEPS {
        let logits = model.layer.pre_activation(&x)?;
        let (_, grad) = softmax_bce_from_logits(&logits, &y)?;
        let g = model.layer.backward_pre(&grad, &x)?;
        let layer = &mut model.layer;
        adam.step(
            &mut [layer.weights.as_mut_slice(), layer.bias.as_mut_slice()],
            &[g.weights.as_slice(), &g.bias],
        )?;
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// `(case index, control index)` pairs into the input slices.
    pub pairs: Vec<(usize, usize)>,
    /// Cases left without a control because the pool ran out.
    pub unmatched_cases: Vec<usize>,
    pub model: PropensityModel,
}

impl MatchReport {
    pub fn is_complete(&self) -> bool {
        self.unmatched_cases.is_empty()
    }
}

/// 1:1 greedy nearest-neighbour matching on the propensity score, without
/// replacement, visiting cases in a random order. Ties go to the lowest
/// control index. Runs short of controls are reported, not treated as errors.
pub fn propensity_match(
    cases: &[&AdmissionRecord],
    controls: &[&AdmissionRecord],
    rng: &mut Rng,
) -> Result<MatchReport> {
    if cases.is_empty() {
        return Err(Error::Data("propensity matching needs at least one case".into()));
    }
    if controls.is_empty() {
        return Err(Error::Data("propensity matching needs at least one control".into()));
    }
    let model = fit_propensity(cases, controls)?;
    let case_scores = model.score(cases)?;
    let control_scores = model.score(controls)?;
    let mut used = vec![false; controls.len()];
    let mut pairs = Vec::with_capacity(cases.len());
    let mut unmatched_cases = Vec::new();
    for ci in rng.permutation(cases.len()) {
        let best = (0..controls.len()).filter(|&j| !used[j]).min_by(|&a, &b| {
            let da = (control_scores[a] - case_scores[ci]).abs();
            let db = (control_scores[b] - case_scores[ci]).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        match best {
            Some(j) => {
                used[j] = true;
                pairs.push((ci, j));
            }
            None => unmatched_cases.push(ci),
        }
    }
    if !unmatched_cases.is_empty() {
        log::warn!(
            "{} of {} cases left unmatched: only {} controls",
            unmatched_cases.len(),
            cases.len(),
            controls.len()
        );
    }
    unmatched_cases.sort_unstable();
    Ok(MatchReport {
        pairs,
        unmatched_cases,
        model,
    })
}

/// Splits aggregated records by label, matches, and returns all cases followed
/// by their matched controls, each group in input order.
pub fn match_cohort(records: &[AdmissionRecord], rng: &mut Rng) -> Result<(Vec<AdmissionRecord>, MatchReport)> {
    let cases: Vec<&AdmissionRecord> = records.iter().filter(|r| r.label == 1).collect();
    let controls: Vec<&AdmissionRecord> = records.iter().filter(|r| r.label == 0).collect();
    let report = propensity_match(&cases, &controls, rng)?;
    let mut chosen: Vec<usize> = report.pairs.iter().map(|&(_, j)| j).collect();
    chosen.sort_unstable();
    let out = cases
        .iter()
        .map(|r| (*r).clone())
        .chain(chosen.iter().map(|&j| controls[j].clone()))
        .collect();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::io::parse_timestamp;

    fn person(id: usize, age: f64, sex: u8, label: u8) -> AdmissionRecord {
        AdmissionRecord {
            patient_id: format!("p{id}"),
            admission_id: "a".into(),
            timestamp: parse_timestamp("2020-01-01").unwrap(),
            age,
            sex,
            label,
            measurements: Default::default(),
            diagnosis_codes: Default::default(),
        }
    }

    #[test]
    fn nearest_age_wins() {
        let case = person(0, 50.0, 1, 1);
        let c1 = person(1, 49.0, 1, 0);
        let c2 = person(2, 70.0, 1, 0);
        let rep = propensity_match(&[&case], &[&c2, &c1], &mut Rng::new(0)).unwrap();
        assert_eq!(rep.pairs, vec![(0, 1)]);
    }

    #[test]
    fn zero_controls_is_an_error() {
        let case = person(0, 50.0, 1, 1);
        assert!(propensity_match(&[&case], &[], &mut Rng::new(0)).is_err());
    }

    #[test]
    fn short_pool_gives_partial_match() {
        let cases: Vec<_> = (0..3).map(|i| person(i, 60.0 + i as f64, 0, 1)).collect();
        let control = person(9, 61.0, 0, 0);
        let refs: Vec<&AdmissionRecord> = cases.iter().collect();
        let rep = propensity_match(&refs, &[&control], &mut Rng::new(1)).unwrap();
        assert_eq!(rep.pairs.len(), 1);
        assert_eq!(rep.unmatched_cases.len(), 2);
        assert!(!rep.is_complete());
    }

    #[test]
    fn balance_on_identical_distributions() {
        let mut rng = Rng::new(7);
        let mut cases = Vec::new();
        let mut controls = Vec::new();
        for i in 0..200 {
            cases.push(person(i, 70.0 + 10.0 * rng.normal(), u8::from(rng.bernoulli(0.5)), 1));
        }
        for i in 0..600 {
            controls.push(person(
                1000 + i,
                70.0 + 10.0 * rng.normal(),
                u8::from(rng.bernoulli(0.5)),
                0,
            ));
        }
        let cr: Vec<&AdmissionRecord> = cases.iter().collect();
        let kr: Vec<&AdmissionRecord> = controls.iter().collect();
        let rep = propensity_match(&cr, &kr, &mut rng).unwrap();
        let used: std::collections::BTreeSet<usize> = rep.pairs.iter().map(|p| p.1).collect();
        assert_eq!(used.len(), rep.pairs.len());
        let ma = cases.iter().map(|r| r.age).sum::<f64>() / 200.0;
        let mb = rep.pairs.iter().map(|p| controls[p.1].age).sum::<f64>() / 200.0;
        let va = cases.iter().map(|r| (r.age - ma).powi(2)).sum::<f64>() / 199.0;
        let vb = rep.pairs.iter().map(|p| (controls[p.1].age - mb).powi(2)).sum::<f64>() / 199.0;
        let smd = (ma - mb).abs() / ((va + vb) / 2.0).sqrt();
        assert!(smd < 0.1, "smd {smd}");
    }
}
