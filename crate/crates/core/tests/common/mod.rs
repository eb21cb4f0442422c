#![allow(dead_code)]

use dsec_core::cohort::{
    generate_synthetic_cohort, prepare_cohort, FilterThresholds, PreparedCohort, SplitSpec, SyntheticSpec,
};
use dsec_core::{Matrix, Rng};

/// Two Gaussian clumps in `d` dimensions whose centres are `separation`
/// standard deviations apart along a random direction.
pub fn two_clumps(n_per: usize, d: usize, separation: f64, seed: u64) -> (Matrix, Vec<u8>) {
    let mut rng = Rng::new(seed);
    let mut dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);
    let mut data = Vec::with_capacity(2 * n_per * d);
    let mut labels = Vec::with_capacity(2 * n_per);
    for i in 0..2 * n_per {
        let side = if i % 2 == 0 { 0.5 } else { -0.5 };
        for &u in &dir {
            data.push(side * separation * u + rng.normal());
        }
        labels.push((i % 2) as u8);
    }
    (Matrix::from_vec(2 * n_per, d, data).unwrap(), labels)
}

/// Best agreement between cluster labels and classes over both label swaps.
pub fn two_way_accuracy(assign: &[usize], labels: &[u8]) -> f64 {
    let same = assign.iter().zip(labels).filter(|(&a, &l)| a == l as usize).count();
    let n = labels.len();
    same.max(n - same) as f64 / n as f64
}

pub fn default_prepared(seed: u64) -> PreparedCohort {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default_preset(seed)).unwrap();
    prepare_cohort(
        &cohort.matrix,
        &FilterThresholds::default(),
        &SplitSpec {
            seed,
            ..Default::default()
        },
    )
    .unwrap()
}

/// A matrix whose presence pattern is given row by row; present cells hold `1.0`.
pub fn matrix_from_mask(mask: &[Vec<bool>]) -> dsec_core::cohort::PatientMatrix {
    let n = mask.len();
    let d = mask[0].len();
    let flat: Vec<bool> = mask.iter().flatten().copied().collect();
    let values = flat.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    dsec_core::cohort::PatientMatrix::new(
        (0..n).map(|i| format!("P{i:03}")).collect(),
        Matrix::from_vec(n, d, values).unwrap(),
        flat,
        (0..n).map(|i| (i % 2) as u8).collect(),
        (0..d).map(|j| format!("f{j}")).collect(),
        vec![Default::default(); n],
    )
    .unwrap()
}

/// 100 patients; `f0`, `f1`, `f2` present in 59, 60 and 61 of them, `f3` everywhere.
pub fn feature_boundary_fixture() -> dsec_core::cohort::PatientMatrix {
    let mask: Vec<Vec<bool>> = (0..100).map(|i| vec![i < 59, i < 60, i < 61, true]).collect();
    matrix_from_mask(&mask)
}

/// 13 fully present features and 30 patients; patient 0 has 7 features,
/// patient 1 has 8, every other patient has all 13.
pub fn case_boundary_fixture() -> dsec_core::cohort::PatientMatrix {
    let mask: Vec<Vec<bool>> = (0..30)
        .map(|i| match i {
            0 => (0..13).map(|j| j < 7).collect(),
            1 => (0..13).map(|j| j < 8).collect(),
            _ => vec![true; 13],
        })
        .collect();
    matrix_from_mask(&mask)
}
