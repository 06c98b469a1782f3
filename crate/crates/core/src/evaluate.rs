//! Comparing and summarizing clustering results.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{AwtError, Result};
use crate::pipeline::{run, AwtConfig, ClusteringResult};
use crate::preprocess::ParamStats;
use crate::wavelet::WaveletPanel;

/// Station id to cluster label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAssignment(pub BTreeMap<String, usize>);

impl LabelAssignment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&ClusteringResult> for LabelAssignment {
    fn from(r: &ClusteringResult) -> Self {
        Self(r.assignments.clone())
    }
}

impl FromIterator<(String, usize)> for LabelAssignment {
    fn from_iter<I: IntoIterator<Item = (String, usize)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

// Terms are sorted before summation so the result does not depend on label
// values or argument order.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    ordered_sum(
        counts
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .collect(),
    )
}

/// Normalized mutual information `I(A;B) / sqrt(H(A) H(B))` with natural
/// logarithms, over index-aligned label slices.
///
/// Two single-cluster partitions score 1.0; a single-cluster partition
/// against any partition with more than one cluster scores 0.0.
pub fn nmi_from_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(AwtError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    let n = a.len() as f64;
    let mut row: HashMap<usize, usize> = HashMap::new();
    let mut col: HashMap<usize, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *row.entry(x).or_default() += 1;
        *col.entry(y).or_default() += 1;
        *cells.entry((x, y)).or_default() += 1;
    }
    let ha = entropy(row.values().copied(), n);
    let hb = entropy(col.values().copied(), n);
    match (ha == 0.0, hb == 0.0) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mi = ordered_sum(
        cells
            .iter()
            .map(|(&(x, y), &c)| {
                let c = c as f64;
                let expected = (row[&x] * col[&y]) as f64;
                (c / n) * (n * c / expected).ln()
            })
            .collect(),
    );
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// NMI between two assignments over the same station ids.
pub fn nmi(a: &LabelAssignment, b: &LabelAssignment) -> Result<f64> {
    let ka: BTreeSet<&String> = a.0.keys().collect();
    let kb: BTreeSet<&String> = b.0.keys().collect();
    if ka != kb {
        return Err(AwtError::IdMismatch {
            only_in_a: ka.difference(&kb).take(10).map(|s| s.to_string()).collect(),
            only_in_b: kb.difference(&ka).take(10).map(|s| s.to_string()).collect(),
        });
    }
    // both maps iterate in key order
    let la: Vec<usize> = a.0.values().copied().collect();
    let lb: Vec<usize> = b.0.values().copied().collect();
    nmi_from_labels(&la, &lb)
}

/// Non-empty cluster sizes in descending order with consecutive ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeProfile {
    pub cluster_ids: Vec<usize>,
    pub sizes: Vec<usize>,
    pub is_outlier: Vec<bool>,
    pub ratios: Vec<f64>,
}

/// Sorts descending by size, then ascending by cluster id; empty clusters are
/// left out.
pub fn size_profile(result: &ClusteringResult) -> SizeProfile {
    let mut entries: Vec<_> = result
        .clusters
        .iter()
        .filter(|c| !c.members.is_empty())
        .map(|c| (c.members.len(), c.cluster_id, c.is_outlier))
        .collect();
    entries.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let sizes: Vec<usize> = entries.iter().map(|e| e.0).collect();
    SizeProfile {
        cluster_ids: entries.iter().map(|e| e.1).collect(),
        is_outlier: entries.iter().map(|e| e.2).collect(),
        ratios: size_ratios(&sizes),
        sizes,
    }
}

pub fn size_ratios(sizes: &[usize]) -> Vec<f64> {
    sizes
        .windows(2)
        .map(|w| w[0] as f64 / w[1] as f64)
        .collect()
}

/// Pointwise mean of the member series of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMeanSeries {
    pub cluster_id: usize,
    pub size: usize,
    pub is_outlier: bool,
    /// One time-domain series per parameter.
    pub per_parameter: Vec<Vec<f64>>,
}

/// Mean reconstructed series per non-empty cluster and parameter. With
/// `scaling`, means are mapped back to physical units.
pub fn cluster_mean_series(
    result: &ClusteringResult,
    panels: &[WaveletPanel],
    scaling: Option<&[ParamStats]>,
) -> Result<Vec<ClusterMeanSeries>> {
    let by_id: HashMap<&str, &WaveletPanel> = panels.iter().map(|p| (p.station_id(), p)).collect();
    let mut out = Vec::new();
    for cluster in result.clusters.iter().filter(|c| !c.members.is_empty()) {
        let mut sums: Option<Vec<Vec<f64>>> = None;
        for id in &cluster.members {
            let panel = by_id
                .get(id.as_str())
                .ok_or_else(|| AwtError::Structure(format!("no panel for station `{id}`")))?;
            let series = panel.reconstruct()?;
            match &mut sums {
                None => sums = Some(series),
                Some(acc) => {
                    if acc.len() != series.len() {
                        return Err(AwtError::DimensionMismatch {
                            expected: acc.len(),
                            found: series.len(),
                        });
                    }
                    for (a, s) in acc.iter_mut().zip(&series) {
                        for (x, y) in a.iter_mut().zip(s) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let n = cluster.members.len() as f64;
        let mut means = sums.unwrap_or_default();
        for (p, series) in means.iter_mut().enumerate() {
            let stats = match scaling {
                Some(s) => Some(s.get(p).ok_or(AwtError::DimensionMismatch {
                    expected: series.len(),
                    found: s.len(),
                })?),
                None => None,
            };
            for v in series.iter_mut() {
                *v /= n;
                if let Some(st) = stats {
                    *v = st.unscale(*v);
                }
            }
        }
        out.push(ClusterMeanSeries {
            cluster_id: cluster.cluster_id,
            size: cluster.members.len(),
            is_outlier: cluster.is_outlier,
            per_parameter: means,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub tree_levels: usize,
    pub max_resolution: usize,
    pub drop_levels: usize,
    pub k: usize,
    pub nmi: f64,
}

/// Runs the configured clustering once per drop count and compares each
/// result with the undropped run.
pub fn resolution_study(
    panels: &[WaveletPanel],
    config: &AwtConfig,
    drop_grid: &[usize],
) -> Result<Vec<StudyRow>> {
    let available = panels.first().ok_or(AwtError::EmptyInput)?.level_count();
    let reference = run(
        panels,
        &AwtConfig {
            drop_levels: 0,
            ..config.clone()
        },
    )?;
    let reference_labels = LabelAssignment::from(&reference);
    drop_grid
        .iter()
        .map(|&d| {
            let result = if d == 0 {
                reference.clone()
            } else {
                run(
                    panels,
                    &AwtConfig {
                        drop_levels: d,
                        ..config.clone()
                    },
                )?
            };
            Ok(StudyRow {
                tree_levels: config.tree_levels,
                max_resolution: available - d,
                drop_levels: d,
                k: result.k,
                nmi: nmi(&reference_labels, &LabelAssignment::from(&result))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Cluster, Mode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assign(pairs: &[(&str, usize)]) -> LabelAssignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn identical_partitions_score_one() {
        let a = assign(&[("a", 0), ("b", 0), ("c", 1), ("d", 2)]);
        assert!((nmi(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_conventions() {
        let one = assign(&[("a", 0), ("b", 0), ("c", 0)]);
        let singles = assign(&[("a", 0), ("b", 1), ("c", 2)]);
        assert_eq!(nmi(&one, &singles).unwrap(), 0.0);
        assert_eq!(nmi(&singles, &one).unwrap(), 0.0);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn id_mismatch_lists_differences() {
        let a = assign(&[("a", 0), ("b", 0)]);
        let b = assign(&[("a", 0), ("c", 0)]);
        assert_eq!(
            nmi(&a, &b),
            Err(AwtError::IdMismatch {
                only_in_a: vec!["b".into()],
                only_in_b: vec!["c".into()],
            })
        );
    }

    #[test]
    fn hand_computed_value() {
        // contingency [[2,0],[1,1]] over 4 points
        let a = [0, 0, 1, 1];
        let b = [0, 0, 0, 1];
        let ln = f64::ln;
        let ha = ln(2.0);
        let hb = -(0.75 * ln(0.75) + 0.25 * ln(0.25));
        let mi = 0.5 * ln(0.5 / (0.5 * 0.75))
            + 0.25 * ln(0.25 / (0.5 * 0.75))
            + 0.25 * ln(0.25 / (0.5 * 0.25));
        let want = mi / (ha * hb).sqrt();
        assert!((nmi_from_labels(&a, &b).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a: Vec<usize> = (0..200).map(|_| rng.random_range(0..6)).collect();
            let b: Vec<usize> = a
                .iter()
                .map(|&x| {
                    if rng.random_bool(0.3) {
                        rng.random_range(0..4)
                    } else {
                        x
                    }
                })
                .collect();
            let v = nmi_from_labels(&a, &b).unwrap();
            assert_eq!(v, nmi_from_labels(&b, &a).unwrap());
            assert!((0.0..=1.0).contains(&v));
            let relabeled: Vec<usize> = a.iter().map(|&x| (x * 7 + 3) % 11 + 100).collect();
            assert_eq!(v, nmi_from_labels(&relabeled, &b).unwrap());
        }
    }

    #[test]
    fn independent_labelings_score_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut total = 0.0;
        for _ in 0..100 {
            let a: Vec<usize> = (0..1000).map(|_| rng.random_range(0..5)).collect();
            let b: Vec<usize> = (0..1000).map(|_| rng.random_range(0..5)).collect();
            total += nmi_from_labels(&a, &b).unwrap();
        }
        assert!(total / 100.0 < 0.1);
    }

    fn result_with(clusters: &[(usize, &[&str], bool)]) -> ClusteringResult {
        let clusters: Vec<Cluster> = clusters
            .iter()
            .map(|(id, m, o)| Cluster {
                cluster_id: *id,
                members: m.iter().map(|s| s.to_string()).collect(),
                centroid: vec![],
                is_outlier: *o,
            })
            .collect();
        let assignments = clusters
            .iter()
            .flat_map(|c| c.members.iter().map(move |m| (m.clone(), c.cluster_id)))
            .collect();
        ClusteringResult {
            config: AwtConfig {
                mode: Mode::Awt,
                ..AwtConfig::default()
            },
            k: clusters.len(),
            tree_leaf_count: clusters.len(),
            available_levels: 1,
            final_resolution: 1,
            clusters,
            assignments,
            cutoff: crate::pipeline::Cutoff::TooFewClusters,
            outlier_count: 0,
            mean_series: vec![],
            refinement: vec![],
        }
    }

    #[test]
    fn size_profiles() {
        let one = size_profile(&result_with(&[(0, &["a", "b"], false)]));
        assert_eq!(one.sizes, vec![2]);
        assert!(one.ratios.is_empty());

        let two = size_profile(&result_with(&[
            (0, &["a", "b", "c"], false),
            (1, &["d", "e", "f"], false),
        ]));
        assert_eq!(two.sizes, vec![3, 3]);
        assert_eq!(two.ratios, vec![1.0]);
        assert_eq!(two.cluster_ids, vec![0, 1]);

        let many = size_profile(&result_with(&[
            (0, &["a"], true),
            (1, &["b", "c", "d", "e"], false),
            (2, &[], false),
            (3, &["f", "g"], false),
        ]));
        assert_eq!(many.sizes, vec![4, 2, 1]);
        assert_eq!(many.cluster_ids, vec![1, 3, 0]);
        assert_eq!(many.ratios.len(), many.sizes.len() - 1);
    }

    fn panel(id: &str, v: Vec<f64>) -> WaveletPanel {
        WaveletPanel::from_series(id, &[v]).unwrap()
    }

    #[test]
    fn mean_series_examples() {
        let panels = vec![
            panel("a", vec![0.0; 6]),
            panel("b", vec![2.0; 6]),
            panel("c", vec![1.0, 5.0, -3.0, 2.0, 0.5, 7.0]),
            panel("d", vec![4.0, 4.0, 1.0, 1.0, 9.0, 9.0]),
            panel("e", vec![4.0, 4.0, 1.0, 1.0, 9.0, 9.0]),
        ];
        let r = result_with(&[
            (0, &["a", "b"], false),
            (1, &["c"], true),
            (2, &["d", "e"], false),
        ]);
        let means = cluster_mean_series(&r, &panels, None).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&means[0].per_parameter[0], &[1.0; 6]));
        assert!(close(
            &means[1].per_parameter[0],
            &[1.0, 5.0, -3.0, 2.0, 0.5, 7.0]
        ));
        assert!(close(
            &means[2].per_parameter[0],
            &[4.0, 4.0, 1.0, 1.0, 9.0, 9.0]
        ));
        assert_eq!(means[0].per_parameter[0].len(), 6);

        let stats = [ParamStats {
            parameter: "t".into(),
            mean: 10.0,
            std: 2.0,
        }];
        let scaled = cluster_mean_series(&r, &panels, Some(&stats)).unwrap();
        assert!(close(&scaled[0].per_parameter[0], &[12.0; 6]));
    }

    #[test]
    fn mean_series_conserve_grand_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ids: Vec<String> = (0..30).map(|i| format!("s{i}")).collect();
        let panels: Vec<WaveletPanel> = ids
            .iter()
            .map(|id| {
                let s = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
                WaveletPanel::from_series(id.as_str(), &[s]).unwrap()
            })
            .collect();
        let groups: Vec<Vec<&str>> = (0..4)
            .map(|g| ids.iter().skip(g).step_by(4).map(|s| s.as_str()).collect())
            .collect();
        let spec: Vec<(usize, &[&str], bool)> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (i, g.as_slice(), false))
            .collect();
        let r = result_with(&spec);
        let means = cluster_mean_series(&r, &panels, None).unwrap();
        let raw: Vec<Vec<f64>> = panels
            .iter()
            .map(|p| p.reconstruct().unwrap().remove(0))
            .collect();
        for t in 0..20 {
            let grand = raw.iter().map(|s| s[t]).sum::<f64>() / 30.0;
            let weighted = means
                .iter()
                .map(|m| m.size as f64 * m.per_parameter[0][t])
                .sum::<f64>()
                / 30.0;
            assert!((grand - weighted).abs() < 1e-9);
        }
    }
}
