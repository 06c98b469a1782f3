//! End-to-end clustering: CF tree over coarse wavelet prefixes, I-Kmeans
//! refinement up to the retained resolution, and outlier flagging on the
//! final cluster sizes. Also hosts the plain BIRCH baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cftree::{CfTree, LeafCluster, DEFAULT_BRANCHING_FACTOR};
use crate::error::{AwtError, Result};
use crate::evaluate::{cluster_mean_series, ClusterMeanSeries};
use crate::ikmeans::{prefixes, refine, LevelTrace, DEFAULT_MAX_ITERS_PER_LEVEL};
use crate::wavelet::{check_uniform, WaveletPanel};

/// Smallest size ratio between neighbouring clusters that counts as a step.
pub const MIN_STEP_RATIO: f64 = 2.0;
pub const AWT_FALLBACK_OUTLIER_SIZE: usize = 1;
pub const BIRCH_OUTLIER_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Awt,
    Birch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwtConfig {
    /// Merge bound on the squared average inter-cluster distance.
    pub threshold: f64,
    /// Wavelet levels used to build the CF tree.
    pub tree_levels: usize,
    /// Finest levels discarded before clustering.
    pub drop_levels: usize,
    pub branching_factor: usize,
    pub max_iters_per_level: usize,
    /// Fixed outlier size bound; replaces the automatic cutoff when set.
    pub outlier_max_size: Option<usize>,
    pub mode: Mode,
}

impl Default for AwtConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            tree_levels: 3,
            drop_levels: 0,
            branching_factor: DEFAULT_BRANCHING_FACTOR,
            max_iters_per_level: DEFAULT_MAX_ITERS_PER_LEVEL,
            outlier_max_size: None,
            mode: Mode::Awt,
        }
    }
}

impl AwtConfig {
    pub fn validate(&self, available_levels: usize) -> Result<()> {
        let bad = |msg: String| Err(AwtError::InvalidConfig(msg));
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return bad(format!(
                "threshold must be positive and finite, got {}",
                self.threshold
            ));
        }
        if self.branching_factor < 2 {
            return bad(format!(
                "branching factor must be >= 2, got {}",
                self.branching_factor
            ));
        }
        if self.max_iters_per_level == 0 {
            return bad("max iterations per level must be >= 1".into());
        }
        if self.drop_levels >= available_levels {
            return bad(format!(
                "cannot drop {} of {available_levels} levels",
                self.drop_levels
            ));
        }
        let retained = available_levels - self.drop_levels;
        if self.mode == Mode::Awt && (self.tree_levels == 0 || self.tree_levels > retained) {
            return bad(format!(
                "tree levels must be in 1..={retained} ({available_levels} available, {} dropped), got {}",
                self.drop_levels, self.tree_levels
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: usize,
    pub members: Vec<String>,
    pub centroid: Vec<f64>,
    pub is_outlier: bool,
}

/// How the outlier boundary was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Cutoff {
    /// Clusters after position `boundary` in the size-sorted list are
    /// outliers.
    Step { boundary: usize, ratio: f64 },
    /// No size ratio above [`MIN_STEP_RATIO`]; `max_ratio` is the largest seen.
    NoClearStep { max_ratio: f64 },
    /// Fewer than two non-empty clusters.
    TooFewClusters,
    /// Clusters of at most `max_size` members are outliers.
    MaxSize { max_size: usize },
}

/// Locates the largest relative drop in a descending size list.
///
/// Ties go to the latest position so that more clusters stay inliers.
pub fn auto_cutoff(sizes: &[usize]) -> Cutoff {
    if sizes.len() < 2 {
        return Cutoff::TooFewClusters;
    }
    debug_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
    let mut boundary = 0;
    let mut ratio = f64::NEG_INFINITY;
    for (i, w) in sizes.windows(2).enumerate() {
        let r = w[0] as f64 / w[1] as f64;
        if r >= ratio {
            ratio = r;
            boundary = i;
        }
    }
    if ratio > MIN_STEP_RATIO {
        Cutoff::Step { boundary, ratio }
    } else {
        Cutoff::NoClearStep { max_ratio: ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub config: AwtConfig,
    /// Number of clusters; in AWT mode always the CF-tree leaf count, even if
    /// refinement emptied some clusters.
    pub k: usize,
    pub tree_leaf_count: usize,
    pub available_levels: usize,
    /// Resolution of the reported centroids.
    pub final_resolution: usize,
    pub clusters: Vec<Cluster>,
    pub assignments: BTreeMap<String, usize>,
    pub cutoff: Cutoff,
    /// Number of stations in outlier clusters.
    pub outlier_count: usize,
    pub mean_series: Vec<ClusterMeanSeries>,
    pub refinement: Vec<LevelTrace>,
}

impl ClusteringResult {
    pub fn outlier_cluster_count(&self) -> usize {
        self.clusters.iter().filter(|c| c.is_outlier).count()
    }
}

fn build_tree(panels: &[WaveletPanel], levels: usize, config: &AwtConfig) -> Result<CfTree> {
    let data = prefixes(panels, levels)?;
    let mut tree = CfTree::new(config.threshold, config.branching_factor, data[0].len())?;
    for (i, v) in data.iter().enumerate() {
        tree.insert(i, v)?;
    }
    Ok(tree)
}

fn prepare(panels: &[WaveletPanel], config: &AwtConfig) -> Result<(usize, Vec<WaveletPanel>)> {
    check_uniform(panels)?;
    let available = panels[0].level_count();
    config.validate(available)?;
    let reduced = panels
        .iter()
        .map(|p| p.drop_finest_levels(config.drop_levels))
        .collect::<Result<Vec<_>>>()?;
    Ok((available, reduced))
}

/// Marks outlier clusters in place and reports the rule used.
fn flag_outliers(clusters: &mut [Cluster], config: &AwtConfig) -> Cutoff {
    let mut order: Vec<usize> = (0..clusters.len())
        .filter(|&i| !clusters[i].members.is_empty())
        .collect();
    order.sort_by(|&a, &b| {
        clusters[b]
            .members
            .len()
            .cmp(&clusters[a].members.len())
            .then(clusters[a].cluster_id.cmp(&clusters[b].cluster_id))
    });
    let by_size = |clusters: &mut [Cluster], max_size: usize| {
        for c in clusters.iter_mut() {
            c.is_outlier = !c.members.is_empty() && c.members.len() <= max_size;
        }
    };

    let fixed = match (config.outlier_max_size, config.mode) {
        (Some(m), _) => Some(m),
        (None, Mode::Birch) => Some(BIRCH_OUTLIER_SIZE),
        (None, Mode::Awt) => None,
    };
    if let Some(max_size) = fixed {
        by_size(clusters, max_size);
        return Cutoff::MaxSize { max_size };
    }

    let sizes: Vec<usize> = order.iter().map(|&i| clusters[i].members.len()).collect();
    let cutoff = auto_cutoff(&sizes);
    match cutoff {
        Cutoff::Step { boundary, .. } => {
            for (pos, &i) in order.iter().enumerate() {
                clusters[i].is_outlier = pos > boundary;
            }
        }
        Cutoff::NoClearStep { .. } => by_size(clusters, AWT_FALLBACK_OUTLIER_SIZE),
        Cutoff::TooFewClusters | Cutoff::MaxSize { .. } => {}
    }
    cutoff
}

fn finish(
    panels: &[WaveletPanel],
    config: &AwtConfig,
    available_levels: usize,
    tree_leaf_count: usize,
    final_resolution: usize,
    centroids: Vec<Vec<f64>>,
    assignments: &[usize],
    refinement: Vec<LevelTrace>,
) -> Result<ClusteringResult> {
    let mut clusters: Vec<Cluster> = centroids
        .into_iter()
        .enumerate()
        .map(|(cluster_id, centroid)| Cluster {
            cluster_id,
            members: Vec::new(),
            centroid,
            is_outlier: false,
        })
        .collect();
    let mut map = BTreeMap::new();
    for (panel, &c) in panels.iter().zip(assignments) {
        clusters[c].members.push(panel.station_id().to_string());
        if map.insert(panel.station_id().to_string(), c).is_some() {
            return Err(AwtError::Structure(format!(
                "station id `{}` appears twice",
                panel.station_id()
            )));
        }
    }
    let cutoff = flag_outliers(&mut clusters, config);
    let outlier_count = clusters
        .iter()
        .filter(|c| c.is_outlier)
        .map(|c| c.members.len())
        .sum();
    let mut result = ClusteringResult {
        config: config.clone(),
        k: clusters.len(),
        tree_leaf_count,
        available_levels,
        final_resolution,
        clusters,
        assignments: map,
        cutoff,
        outlier_count,
        mean_series: Vec::new(),
        refinement,
    };
    result.mean_series = cluster_mean_series(&result, panels, None)?;
    Ok(result)
}

fn leaf_assignments(leaves: &[LeafCluster], n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for (c, leaf) in leaves.iter().enumerate() {
        for &id in &leaf.member_ids {
            out[id] = c;
        }
    }
    out
}

/// AWT: CF tree over the first `tree_levels` levels, then I-Kmeans from there
/// to the finest retained level. Panels are inserted in slice order.
pub fn awt_cluster(panels: &[WaveletPanel], config: &AwtConfig) -> Result<ClusteringResult> {
    let (available, reduced) = prepare(panels, config)?;
    let tree = build_tree(&reduced, config.tree_levels, config)?;
    let leaves = tree.leaf_clusters()?;
    let retained = available - config.drop_levels;
    let state = refine(
        &reduced,
        &leaves,
        config.tree_levels,
        retained,
        config.max_iters_per_level,
    )?;
    finish(
        panels,
        config,
        available,
        leaves.len(),
        state.resolution(),
        state.centroids().to_vec(),
        state.assignments(),
        state.history().to_vec(),
    )
}

/// BIRCH baseline: CF tree over every retained level, leaves reported as the
/// final clusters without refinement.
pub fn birch_baseline(panels: &[WaveletPanel], config: &AwtConfig) -> Result<ClusteringResult> {
    let config = AwtConfig {
        mode: Mode::Birch,
        ..config.clone()
    };
    let (available, reduced) = prepare(panels, &config)?;
    let retained = available - config.drop_levels;
    let tree = build_tree(&reduced, retained, &config)?;
    let leaves = tree.leaf_clusters()?;
    let assignments = leaf_assignments(&leaves, panels.len());
    finish(
        panels,
        &config,
        available,
        leaves.len(),
        retained,
        leaves.iter().map(|l| l.cf.centroid()).collect(),
        &assignments,
        Vec::new(),
    )
}

/// Dispatches on `config.mode`.
pub fn run(panels: &[WaveletPanel], config: &AwtConfig) -> Result<ClusteringResult> {
    match config.mode {
        Mode::Awt => awt_cluster(panels, config),
        Mode::Birch => birch_baseline(panels, config),
    }
}

/// The CF tree the configured mode would build, for inspection.
pub fn build_cf_tree(panels: &[WaveletPanel], config: &AwtConfig) -> Result<CfTree> {
    let (available, reduced) = prepare(panels, config)?;
    let levels = match config.mode {
        Mode::Awt => config.tree_levels,
        Mode::Birch => available - config.drop_levels,
    };
    build_tree(&reduced, levels, config)
}

/// CF-tree leaf count for each threshold of an ascending grid.
pub fn count_clusters_for_threshold(
    panels: &[WaveletPanel],
    thresholds: &[f64],
    config: &AwtConfig,
) -> Result<Vec<(f64, usize)>> {
    if thresholds.is_empty() {
        return Err(AwtError::InvalidConfig("threshold grid is empty".into()));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(AwtError::InvalidConfig(
            "threshold grid must be ascending".into(),
        ));
    }
    let (available, reduced) = prepare(panels, config)?;
    let levels = match config.mode {
        Mode::Awt => config.tree_levels,
        Mode::Birch => available - config.drop_levels,
    };
    let data = prefixes(&reduced, levels)?;
    thresholds
        .iter()
        .map(|&threshold| {
            let mut tree = CfTree::new(threshold, config.branching_factor, data[0].len())?;
            for (i, v) in data.iter().enumerate() {
                tree.insert(i, v)?;
            }
            Ok((threshold, tree.leaf_count()))
        })
        .collect()
}
