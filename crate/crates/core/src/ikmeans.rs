//! K-Means over successively finer wavelet prefixes, seeded from CF-tree
//! leaves.

use serde::{Deserialize, Serialize};

use crate::cftree::LeafCluster;
use crate::error::{AwtError, Result};
use crate::features::sq_dist;
use crate::wavelet::{prefix_len, WaveletPanel};

pub const DEFAULT_MAX_ITERS_PER_LEVEL: usize = 100;

/// What happened at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub resolution: usize,
    pub iterations: usize,
    pub reassignments: usize,
    /// Within-cluster SSE before the first iteration, then after each
    /// assign/update pair.
    pub sse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementState {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    resolution: usize,
    history: Vec<LevelTrace>,
}

/// Prefix vectors of every panel at `levels`.
pub fn prefixes(panels: &[WaveletPanel], levels: usize) -> Result<Vec<Vec<f64>>> {
    panels.iter().map(|p| p.prefix_flat(levels)).collect()
}

/// Initial state: one cluster per leaf, centroid = leaf centroid, members as
/// recorded in the leaf. `n_points` is the number of inserted points, whose
/// ids must be exactly `0..n_points`.
pub fn seed_from_leaves(
    leaves: &[LeafCluster],
    n_points: usize,
    resolution: usize,
) -> Result<RefinementState> {
    if leaves.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    let mut assignments = vec![usize::MAX; n_points];
    for (c, leaf) in leaves.iter().enumerate() {
        for &id in &leaf.member_ids {
            match assignments.get_mut(id) {
                Some(slot) if *slot == usize::MAX => *slot = c,
                Some(_) => return Err(AwtError::DuplicatePoint(id)),
                None => {
                    return Err(AwtError::Structure(format!(
                        "leaf member {id} outside 0..{n_points}"
                    )))
                }
            }
        }
    }
    if let Some(missing) = assignments.iter().position(|&a| a == usize::MAX) {
        return Err(AwtError::Structure(format!(
            "point {missing} is in no leaf"
        )));
    }
    Ok(RefinementState {
        centroids: leaves.iter().map(|l| l.cf.centroid()).collect(),
        assignments,
        resolution,
        history: Vec::new(),
    })
}

impl RefinementState {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn history(&self) -> &[LevelTrace] {
        &self.history
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    fn check_data(&self, data: &[Vec<f64>]) -> Result<()> {
        if data.len() != self.assignments.len() {
            return Err(AwtError::DimensionMismatch {
                expected: self.assignments.len(),
                found: data.len(),
            });
        }
        let dim = self.centroids[0].len();
        for row in data {
            if row.len() != dim {
                return Err(AwtError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        Ok(())
    }

    /// Moves every point to its nearest centroid (lowest index on ties) and
    /// returns how many points changed cluster.
    pub fn assign_step(&mut self, data: &[Vec<f64>]) -> Result<usize> {
        self.check_data(data)?;
        let mut changed = 0;
        for (point, slot) in data.iter().zip(self.assignments.iter_mut()) {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in self.centroids.iter().enumerate() {
                let d = sq_dist(point, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *slot != best {
                *slot = best;
                changed += 1;
            }
        }
        Ok(changed)
    }

    /// Recomputes each centroid as the mean of its members. Empty clusters
    /// keep their previous centroid.
    pub fn update_step(&mut self, data: &[Vec<f64>]) -> Result<()> {
        self.check_data(data)?;
        let dim = self.centroids[0].len();
        let mut sums = vec![vec![0.0; dim]; self.k()];
        let mut counts = vec![0usize; self.k()];
        for (point, &a) in data.iter().zip(&self.assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(point) {
                *s += v;
            }
        }
        for ((centroid, sum), count) in self.centroids.iter_mut().zip(sums).zip(counts) {
            if count > 0 {
                let n = count as f64;
                *centroid = sum.into_iter().map(|s| s / n).collect();
            }
        }
        Ok(())
    }

    /// Total squared distance of points to their assigned centroids.
    pub fn sse(&self, data: &[Vec<f64>]) -> f64 {
        data.iter()
            .zip(&self.assignments)
            .map(|(p, &a)| sq_dist(p, &self.centroids[a]))
            .sum()
    }

    /// Re-lays centroids out for a finer prefix, filling the newly exposed
    /// coefficients of every parameter with zeros.
    fn project(&mut self, parameters: usize, to_levels: usize) {
        let old_len = prefix_len(self.resolution);
        let new_len = prefix_len(to_levels);
        for centroid in &mut self.centroids {
            let mut next = Vec::with_capacity(parameters * new_len);
            for p in 0..parameters {
                next.extend_from_slice(&centroid[p * old_len..(p + 1) * old_len]);
                next.resize((p + 1) * new_len, 0.0);
            }
            *centroid = next;
        }
        self.resolution = to_levels;
    }
}

/// Runs K-Means from `l_start` up to `l_max` levels.
///
/// At each new resolution the centroids are zero-extended and then
/// re-derived from their members; assign/update pairs repeat until no point
/// moves or `max_iters_per_level` is hit. If a whole level passes without a
/// single reassignment, refinement stops there.
pub fn refine(
    panels: &[WaveletPanel],
    leaves: &[LeafCluster],
    l_start: usize,
    l_max: usize,
    max_iters_per_level: usize,
) -> Result<RefinementState> {
    let first = panels.first().ok_or(AwtError::EmptyInput)?;
    let available = first.level_count();
    if l_start == 0 || l_start > l_max || l_max > available {
        return Err(AwtError::InvalidConfig(format!(
            "refinement levels {l_start}..={l_max} invalid for {available} available levels"
        )));
    }
    if max_iters_per_level == 0 {
        return Err(AwtError::InvalidConfig(
            "max_iters_per_level must be positive".into(),
        ));
    }
    let parameters = first.parameter_count();
    let mut state = seed_from_leaves(leaves, panels.len(), l_start)?;

    for level in l_start..=l_max {
        let data = prefixes(panels, level)?;
        if level > l_start {
            state.project(parameters, level);
            state.update_step(&data)?;
        }
        state.check_data(&data)?;
        let mut trace = LevelTrace {
            resolution: level,
            iterations: 0,
            reassignments: 0,
            sse: vec![state.sse(&data)],
        };
        while trace.iterations < max_iters_per_level {
            let changed = state.assign_step(&data)?;
            state.update_step(&data)?;
            trace.iterations += 1;
            trace.reassignments += changed;
            trace.sse.push(state.sse(&data));
            if changed == 0 {
                break;
            }
        }
        let quiet = trace.reassignments == 0;
        state.history.push(trace);
        if quiet {
            break;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cftree::CfTree;
    use crate::features::ClusteringFeature;

    fn leaf(points: &[&[f64]], ids: &[usize]) -> LeafCluster {
        LeafCluster {
            cf: ClusteringFeature::from_points(points.iter().copied()).unwrap(),
            member_ids: ids.to_vec(),
        }
    }

    fn state(centroids: Vec<Vec<f64>>, assignments: Vec<usize>) -> RefinementState {
        RefinementState {
            centroids,
            assignments,
            resolution: 1,
            history: Vec::new(),
        }
    }

    #[test]
    fn seeding_copies_leaves() {
        let one = seed_from_leaves(&[leaf(&[&[1.0], &[3.0]], &[0, 1])], 2, 1).unwrap();
        assert_eq!(one.k(), 1);
        assert_eq!(one.assignments(), &[0, 0]);
        assert_eq!(one.centroids(), &[vec![2.0]]);

        let big: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let pts: Vec<[f64; 1]> = big.iter().map(|&x| [x]).collect();
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let leaves = [
            leaf(&refs, &[0, 1, 2, 3, 4, 5, 6, 7]),
            leaf(&[&[100.0], &[101.0]], &[8, 9]),
        ];
        let s = seed_from_leaves(&leaves, 10, 1).unwrap();
        assert_eq!(s.cluster_sizes(), vec![8, 2]);
        assert!((s.centroids()[0][0] - 3.5).abs() < 1e-9);
        assert!((s.centroids()[1][0] - 100.5).abs() < 1e-9);

        assert_eq!(seed_from_leaves(&[], 0, 1), Err(AwtError::EmptyInput));
        assert!(seed_from_leaves(&[leaf(&[&[1.0]], &[0])], 2, 1).is_err());
    }

    #[test]
    fn assign_ties_go_to_lowest_index() {
        let mut s = state(vec![vec![0.0], vec![2.0]], vec![1]);
        assert_eq!(s.assign_step(&[vec![1.0]]).unwrap(), 1);
        assert_eq!(s.assignments(), &[0]);
    }

    #[test]
    fn single_cluster_never_changes() {
        let data = vec![vec![1.0], vec![5.0], vec![-3.0]];
        let mut s = state(vec![vec![0.0]], vec![0, 0, 0]);
        assert_eq!(s.assign_step(&data).unwrap(), 0);
        assert_eq!(s.assignments(), &[0, 0, 0]);
    }

    #[test]
    fn separated_blobs_match_nearest_centroid_oracle() {
        let blob_a: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.1, 0.0]).collect();
        let blob_b: Vec<Vec<f64>> = (0..10).map(|i| vec![50.0 + i as f64 * 0.1, 1.0]).collect();
        let data: Vec<Vec<f64>> = blob_a.iter().chain(&blob_b).cloned().collect();
        let mean = |b: &[Vec<f64>]| -> Vec<f64> {
            (0..2)
                .map(|j| b.iter().map(|p| p[j]).sum::<f64>() / b.len() as f64)
                .collect()
        };
        let centroids = vec![mean(&blob_a), mean(&blob_b)];
        let mut s = state(centroids.clone(), vec![0; 20]);
        s.assign_step(&data).unwrap();
        for (i, p) in data.iter().enumerate() {
            // exhaustive nearest-centroid check
            let d: Vec<f64> = centroids.iter().map(|c| sq_dist(p, c)).collect();
            let want = if d[0] <= d[1] { 0 } else { 1 };
            assert_eq!(s.assignments()[i], want);
            assert_eq!(want, usize::from(i >= 10));
        }
        assert_eq!(s.assign_step(&data).unwrap(), 0);
    }

    #[test]
    fn update_examples() {
        let data = vec![vec![0.0], vec![2.0], vec![7.0]];
        let mut s = state(vec![vec![5.0], vec![9.0], vec![-4.0]], vec![0, 0, 1]);
        s.update_step(&data).unwrap();
        assert_eq!(s.centroids(), &[vec![1.0], vec![7.0], vec![-4.0]]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut s = state(vec![vec![0.0, 0.0]], vec![0]);
        assert!(matches!(
            s.assign_step(&[vec![1.0]]),
            Err(AwtError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_zero_fills_per_parameter() {
        let mut s = state(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![]);
        s.resolution = 2;
        s.project(2, 3);
        assert_eq!(
            s.centroids()[0],
            vec![1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0]
        );
    }

    fn panels_for(series: &[Vec<f64>]) -> Vec<WaveletPanel> {
        series
            .iter()
            .enumerate()
            .map(|(i, s)| WaveletPanel::from_series(format!("s{i}"), std::slice::from_ref(s)).unwrap())
            .collect()
    }

    fn tree_leaves(panels: &[WaveletPanel], levels: usize, threshold: f64) -> Vec<LeafCluster> {
        let data = prefixes(panels, levels).unwrap();
        let mut t = CfTree::new(threshold, 8, data[0].len()).unwrap();
        for (i, p) in data.iter().enumerate() {
            t.insert(i, p).unwrap();
        }
        t.leaf_clusters().unwrap()
    }

    #[test]
    fn perfectly_clustered_data_stops_after_first_level() {
        let series: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![if i < 3 { 0.0 } else { 10.0 }; 16])
            .collect();
        let panels = panels_for(&series);
        let leaves = tree_leaves(&panels, 2, 1.0);
        assert_eq!(leaves.len(), 2);
        let s = refine(&panels, &leaves, 2, 5, 100).unwrap();
        assert_eq!(s.history().len(), 1);
        assert_eq!(s.history()[0].reassignments, 0);
        assert_eq!(s.cluster_sizes(), vec![3, 3]);
    }

    #[test]
    fn one_cluster_per_point_has_zero_sse() {
        let series: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..8).map(|t| (i * 7 + t) as f64).collect())
            .collect();
        let panels = panels_for(&series);
        let leaves = tree_leaves(&panels, 1, 1e-6);
        assert_eq!(leaves.len(), 5);
        let s = refine(&panels, &leaves, 1, 4, 100).unwrap();
        let full = prefixes(&panels, s.resolution()).unwrap();
        assert!(s.sse(&full) < 1e-18);
        assert_eq!(s.k(), 5);
    }

    #[test]
    fn refine_validates_levels() {
        let panels = panels_for(&[vec![1.0; 8], vec![2.0; 8]]);
        let leaves = tree_leaves(&panels, 1, 100.0);
        assert!(refine(&panels, &leaves, 0, 2, 10).is_err());
        assert!(refine(&panels, &leaves, 3, 2, 10).is_err());
        assert!(refine(&panels, &leaves, 1, 5, 10).is_err());
        assert!(refine(&panels, &leaves, 1, 4, 0).is_err());
        // leaves built at another resolution
        assert!(refine(&panels, &leaves, 2, 3, 10).is_err());
    }

    #[test]
    fn sse_never_increases_within_a_level() {
        // overlapping noisy groups so refinement actually moves points
        let series: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                (0..32)
                    .map(|t| {
                        ((i * 31 + t * 17) % 23) as f64 * 0.3
                            + (i % 3) as f64
                            + (t as f64 * 0.2).sin()
                    })
                    .collect()
            })
            .collect();
        let panels = panels_for(&series);
        let leaves = tree_leaves(&panels, 2, 0.8);
        let s = refine(&panels, &leaves, 2, 6, 100).unwrap();
        assert_eq!(s.k(), leaves.len());
        for trace in s.history() {
            for w in trace.sse.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{trace:?}");
            }
        }
    }
}
