//! ROC analysis, random forests and the three-way method comparison.

mod compare;
mod experiment;
mod forest;
mod recovery;
mod roc;

pub use compare::{
    compare_methods, method_rng, score_dec_rf, score_dsec, score_pca_rf, train_method, ComparisonConfig,
    ComparisonReport, FoldMetrics, MethodCurves, ReferenceAuc, REFERENCE_AUC,
};
pub use experiment::{run_synthetic_experiment, ExperimentOutcome};
pub use forest::{
    best_split_on_feature, forest_predict, forest_train, gini, train_tree, DecisionTree, ForestConfig, ForestModel,
    Node,
};
pub use recovery::{score_recovery, PlantedHit, RecoveryReport};
pub use roc::{roc_auc, RocCurve};
