//! Threshold-driven clustering of (multivariate) time series.
//!
//! Series are decomposed with an orthonormal Haar transform. A
//! clustering-feature tree built over the coarsest wavelet levels fixes the
//! number of clusters from a single tightness threshold and seeds a K-Means
//! refinement that walks up through the finer levels. Clusters that end up
//! with very few members are reported as outliers.

pub mod cftree;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod ikmeans;
pub mod pipeline;
pub mod preprocess;
pub mod synthetic;
pub mod wavelet;

pub use cftree::{CfNode, CfTree, LeafCluster};
pub use error::{AwtError, Result};
pub use evaluate::{nmi, resolution_study, size_profile, LabelAssignment, SizeProfile, StudyRow};
pub use features::{panel_dist_sq, ClusteringFeature};
pub use ikmeans::{refine, RefinementState};
pub use pipeline::{
    auto_cutoff, awt_cluster, birch_baseline, build_cf_tree, count_clusters_for_threshold, run,
    AwtConfig, Cluster, ClusteringResult, Cutoff, Mode,
};
pub use preprocess::{PanelSeries, ParamStats, RawStationRecord};
pub use wavelet::{WaveletCoefficients, WaveletPanel};
