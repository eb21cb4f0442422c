//! Subgroup discovery and statistical interpretation of an embedding.

mod enrichment;
mod fisher;
mod kmeans;
mod pca;
mod ward;

pub use enrichment::{
    enrich_pairwise, hierarchical_enrichment, hierarchy_groups, CodeSet, EnrichmentRecord, HierarchyConfig,
    HierarchyReport, MergeComparison, Side, SkippedMerge,
};
pub use fisher::{fisher_exact, ContingencyTable};
pub use kmeans::{inertia, kmeans, kmeans_restarts, ClusterAssignment, KMeansFit, DEFAULT_RESTARTS};
pub use pca::{pca, Pca};
pub use ward::{agglomerative_ward, cut_tree, LinkageTree, Merge};
