mod common;

use common::{case_boundary_fixture, feature_boundary_fixture, matrix_from_mask};
use dsec_core::cohort::*;
use dsec_core::Rng;

#[test]
fn feature_filter_is_strict_at_sixty_percent() {
    let (m, report) = filter_features_and_cases(&feature_boundary_fixture(), &FilterThresholds::default()).unwrap();
    assert_eq!(report.dropped_features, vec!["f0", "f1"]);
    assert_eq!(m.feature_names, vec!["f2", "f3"]);
}

#[test]
fn case_filter_is_strict_at_sixty_percent() {
    let (m, report) = filter_features_and_cases(&case_boundary_fixture(), &FilterThresholds::default()).unwrap();
    assert!(report.dropped_features.is_empty());
    assert_eq!(report.dropped_patients, vec!["P000"]);
    assert_eq!(m.n_patients(), 29);
    assert_eq!(m.patient_ids[0], "P001");
}

#[test]
fn case_at_exactly_sixty_percent_is_kept() {
    let mask: Vec<Vec<bool>> = (0..10)
        .map(|i| {
            if i == 0 {
                vec![true, true, true, false, false]
            } else {
                vec![true; 5]
            }
        })
        .collect();
    let (m, report) = filter_features_and_cases(&matrix_from_mask(&mask), &FilterThresholds::default()).unwrap();
    assert!(report.dropped_patients.is_empty());
    assert_eq!(m.n_patients(), 10);
}

#[test]
fn cases_are_judged_on_surviving_features() {
    // f0 is dropped, so patient 0 keeps 2 of 3 remaining features
    let mask: Vec<Vec<bool>> = (0..10)
        .map(|i| {
            if i == 0 {
                vec![true, true, true, false]
            } else if i < 5 {
                vec![true, true, true, true]
            } else {
                vec![false, true, true, true]
            }
        })
        .collect();
    let (m, report) = filter_features_and_cases(&matrix_from_mask(&mask), &FilterThresholds::default()).unwrap();
    assert_eq!(report.dropped_features, vec!["f0"]);
    assert!(report.dropped_patients.is_empty());
    assert_eq!(m.n_features(), 3);
}

#[test]
fn dropping_every_feature_is_an_error() {
    let mask: Vec<Vec<bool>> = (0..10).map(|i| vec![i < 3, i < 6]).collect();
    assert!(filter_features_and_cases(&matrix_from_mask(&mask), &FilterThresholds::default()).is_err());
}

#[test]
fn filter_is_idempotent_on_random_missingness() {
    for seed in 0..3 {
        let spec = SyntheticSpec {
            n_patients: 300,
            missingness_rate: 0.25,
            ..SyntheticSpec::default_preset(seed)
        };
        let c = generate_synthetic_cohort(&spec).unwrap();
        let (once, _) = filter_features_and_cases(&c.matrix, &FilterThresholds::default()).unwrap();
        let (twice, report) = filter_features_and_cases(&once, &FilterThresholds::default()).unwrap();
        assert_eq!(report, FilterReport::default());
        assert_eq!(once, twice);
    }
}

#[test]
fn standardizer_sees_only_training_rows() {
    let c = generate_synthetic_cohort(&SyntheticSpec {
        n_patients: 200,
        ..SyntheticSpec::default_preset(1)
    })
    .unwrap();
    let train = c.matrix.select_rows(&(0..150).collect::<Vec<_>>());
    let test = c.matrix.select_rows(&(150..200).collect::<Vec<_>>());
    let mut poisoned = test.clone();
    poisoned.features.as_mut_slice().iter_mut().for_each(|v| *v = 1e6);
    let (tr_a, _, s_a) = impute_and_standardize(&train, &test).unwrap();
    let (tr_b, te_b, s_b) = impute_and_standardize(&train, &poisoned).unwrap();
    assert_eq!(s_a, s_b);
    assert_eq!(tr_a, tr_b);
    assert_eq!(te_b.mask, test.mask);
    assert!(te_b.features.as_slice().iter().all(|v| v.is_finite()));
    // training columns end up centred with unit population spread
    for j in 0..tr_a.n_features() {
        let col: Vec<f64> = (0..tr_a.n_patients()).map(|i| tr_a.features[(i, j)]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn split_is_stratified_disjoint_and_seeded() {
    let labels: Vec<u8> = (0..200).map(|i| u8::from(i % 4 == 0)).collect();
    let spec = SplitSpec {
        seed: 5,
        ..Default::default()
    };
    let s = stratified_split(&labels, &spec).unwrap();
    assert_eq!(s, stratified_split(&labels, &spec).unwrap());
    // round(50 · 0.25) cases and round(150 · 0.25) controls
    assert_eq!(s.test.iter().filter(|&&i| labels[i] == 1).count(), 13);
    assert_eq!(s.test.len(), 13 + 38);
    let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..200).collect::<Vec<_>>());
    let mut fold_rows: Vec<usize> = s.fold_pairs().flat_map(|(_, val)| val).collect();
    fold_rows.sort_unstable();
    assert_eq!(fold_rows, s.train);
}

#[test]
fn admissions_round_trip_through_csv() {
    let c = generate_synthetic_cohort(&SyntheticSpec {
        n_patients: 80,
        ..SyntheticSpec::default_preset(2)
    })
    .unwrap();
    let records = c.to_admissions();
    let schema = AdmissionSchema::default();
    let mut buf = Vec::new();
    write_admissions(&mut buf, &records, &schema).unwrap();
    let loaded = read_admissions(buf.as_slice(), &schema).unwrap();
    assert!(loaded.errors.is_empty(), "{:?}", loaded.errors);
    assert_eq!(loaded.records, records);
    let selected = aggregate_and_select(&loaded.records, &schema.measurement_columns).unwrap();
    let rebuilt = PatientMatrix::from_admissions(&selected, &schema.measurement_columns).unwrap();
    assert_eq!(rebuilt.features, c.matrix.features);
    assert_eq!(rebuilt.mask, c.matrix.mask);
    assert_eq!(rebuilt.labels, c.matrix.labels);
    assert_eq!(rebuilt.codes, c.matrix.codes);
}

#[test]
fn patient_matrix_round_trips_through_csv() {
    let c = generate_synthetic_cohort(&SyntheticSpec {
        n_patients: 50,
        ..SyntheticSpec::default_preset(3)
    })
    .unwrap();
    let mut buf = Vec::new();
    write_patient_matrix(&mut buf, &c.matrix).unwrap();
    let back = read_patient_matrix(buf.as_slice()).unwrap();
    assert_eq!(back.features, c.matrix.features);
    assert_eq!(back.mask, c.matrix.mask);
    assert_eq!(back.codes, c.matrix.codes);
}

#[test]
fn bad_rows_are_reported_not_loaded() {
    let schema = AdmissionSchema {
        measurement_columns: vec!["hr".into()],
    };
    let csv = "patient_id,admission_id,timestamp,age,sex,label,hr,codes\n\
               P1,A1,2015-01-01,60,1,1,80,I50.9\n\
               P2,A1,not-a-date,60,1,0,80,\n\
               P3,A1,2015-01-02,sixty,0,0,,\n";
    let report = read_admissions(csv.as_bytes(), &schema).unwrap();
    assert_eq!(report.records.len(), 1);
    assert_eq!(report.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![3, 4]);
    assert!(read_admissions("patient_id,hr\nP1,3\n".as_bytes(), &schema).is_err());
}

#[test]
fn propensity_matching_balances_demographics() {
    let c = generate_synthetic_cohort(&SyntheticSpec {
        n_patients: 400,
        ..SyntheticSpec::default_preset(4)
    })
    .unwrap();
    let records = c.to_admissions();
    let (kept, report) = match_cohort(&records, &mut Rng::new(4)).unwrap();
    let cases = records.iter().filter(|r| r.label == 1).count();
    assert!(report.is_complete());
    assert_eq!(report.pairs.len(), cases);
    assert_eq!(kept.len(), 2 * cases);
    let (again, _) = match_cohort(&records, &mut Rng::new(4)).unwrap();
    assert_eq!(kept, again);
}

#[test]
fn synthetic_preset_is_valid_and_seeded() {
    let spec = SyntheticSpec::default_preset(0);
    assert!(spec.violations().is_empty());
    assert_eq!(spec.n_patients, 2000);
    let a = generate_synthetic_cohort(&spec).unwrap();
    assert_eq!(a, generate_synthetic_cohort(&spec).unwrap());
    let groups = a.matrix.subgroups.as_ref().unwrap();
    for g in 0..4 {
        assert!(groups.iter().filter(|&&x| x == g).count() >= 100);
    }
    let broken = SyntheticSpec {
        missingness_rate: 1.5,
        class_separation: f64::NAN,
        ..spec
    };
    assert!(broken.violations().len() >= 2);
}
