//! One seeded end-to-end run on a synthetic cohort: method comparison on the
//! held-out split, then enrichment over the DSEC embedding of every patient.

use serde::{Deserialize, Serialize};

use crate::analysis::{agglomerative_ward, hierarchical_enrichment, HierarchyConfig, HierarchyReport};
use crate::cohort::{
    generate_synthetic_cohort, prepare_cohort, FilterThresholds, SplitSpec, SyntheticSpec, NULL_CODES, PLANTED_CODES,
};
use crate::error::{Error, Result};
use crate::eval::{
    score_dec_rf, score_dsec, score_pca_rf, score_recovery, train_method, ComparisonConfig, ComparisonReport,
    MethodCurves, RecoveryReport,
};
use crate::model::Method;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub comparison: ComparisonReport,
    pub hierarchy: HierarchyReport,
    pub recovery: RecoveryReport,
}

/// Uses the default synthetic preset, filter thresholds and split for `seed`.
pub fn run_synthetic_experiment(
    seed: u64,
    config: &ComparisonConfig,
    hierarchy: &HierarchyConfig,
) -> Result<ExperimentOutcome> {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default_preset(seed))?;
    let prepared = prepare_cohort(
        &cohort.matrix,
        &FilterThresholds::default(),
        &SplitSpec {
            seed,
            ..Default::default()
        },
    )?;
    let (train, test) = (&prepared.train, &prepared.test);
    let root = Rng::new(seed);

    let pca = score_pca_rf(&train.features, &train.labels, &test.features, config, &root)?;
    let dec = train_method(Method::Dec, &train.features, &train.labels, config, &root)?;
    let dec_rf = score_dec_rf(&dec, &train.features, &train.labels, &test.features, config, &root)?;
    let dsec = train_method(Method::Dsec, &train.features, &train.labels, config, &root)?;
    let (final_p, transfer_p) = score_dsec(&dsec, &test.features)?;
    let curves = MethodCurves::from_scores(&test.labels, &pca, &dec_rf, &final_p, &transfer_p)?;

    let z = dsec.embed(&prepared.all.features)?;
    let tree = agglomerative_ward(&z)?;
    let hierarchy = hierarchical_enrichment(&tree, &prepared.all.codes, hierarchy)?;
    let subgroups = prepared
        .all
        .subgroups
        .as_ref()
        .ok_or_else(|| Error::Data("synthetic cohort lost its subgroup labels".into()))?;
    let planted: Vec<(usize, &str)> = PLANTED_CODES.iter().enumerate().map(|(g, &(_, c))| (g, c)).collect();
    let recovery = score_recovery(&hierarchy, subgroups, &planted, &NULL_CODES);
    Ok(ExperimentOutcome {
        seed,
        comparison: ComparisonReport::from_curves(curves, Vec::new(), None),
        hierarchy,
        recovery,
    })
}
