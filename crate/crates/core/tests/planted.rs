use awt_core::evaluate::{cluster_mean_series, nmi_from_labels};
use awt_core::synthetic::{planted_sinusoids, PlantedConfig};
use awt_core::{nmi, resolution_study, run, AwtConfig, Cutoff, LabelAssignment, Mode};

#[test]
fn awt_recovers_planted_clusters_and_flags_outliers() {
    let set = planted_sinusoids(&PlantedConfig::default(), 7).unwrap();
    let result = run(&set.panels().unwrap(), &AwtConfig::default()).unwrap();

    let (truth, found): (Vec<usize>, Vec<usize>) = set
        .ids
        .iter()
        .zip(&set.labels)
        .filter_map(|(id, l)| l.map(|l| (l, result.assignments[id])))
        .unzip();
    assert!(nmi_from_labels(&truth, &found).unwrap() >= 0.9);

    for (id, label) in set.ids.iter().zip(&set.labels) {
        let cluster = &result.clusters[result.assignments[id]];
        assert_eq!(cluster.is_outlier, label.is_none(), "{id}");
    }
    assert!(matches!(result.cutoff, Cutoff::Step { .. }));
    assert_eq!(result.outlier_count, 5);
}

#[test]
fn birch_matches_awt_on_planted_data() {
    let set = planted_sinusoids(&PlantedConfig::default(), 3).unwrap();
    let panels = set.panels().unwrap();
    let awt = run(&panels, &AwtConfig::default()).unwrap();
    // BIRCH compares full-resolution series, where noise alone contributes
    // about 2 sigma^2 * 128 to the squared distance
    let birch_config = AwtConfig {
        mode: Mode::Birch,
        threshold: 10.0,
        ..AwtConfig::default()
    };
    let birch = run(&panels, &birch_config).unwrap();
    let score = nmi(&LabelAssignment::from(&awt), &LabelAssignment::from(&birch)).unwrap();
    assert!(score > 0.95, "{score}");
}

#[test]
fn study_rows_follow_drop_grid() {
    let set = planted_sinusoids(&PlantedConfig::default(), 5).unwrap();
    let panels = set.panels().unwrap();
    let rows = resolution_study(&panels, &AwtConfig::default(), &[0, 1, 2, 3]).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].nmi, 1.0);
    let resolutions: Vec<usize> = rows.iter().map(|r| r.max_resolution).collect();
    assert_eq!(resolutions, vec![8, 7, 6, 5]);
    assert!(rows.iter().all(|r| r.k == rows[0].k));
}

#[test]
fn cluster_means_track_planted_offsets() {
    let cfg = PlantedConfig {
        outliers: 0,
        ..PlantedConfig::default()
    };
    let set = planted_sinusoids(&cfg, 11).unwrap();
    let panels = set.panels().unwrap();
    let result = run(&panels, &AwtConfig::default()).unwrap();
    let means = cluster_mean_series(&result, &panels, None).unwrap();
    let mut levels: Vec<f64> = means
        .iter()
        .map(|m| m.per_parameter[0].iter().sum::<f64>() / m.per_parameter[0].len() as f64)
        .collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // offsets are separation * (c - 2); the sinusoids average out
    for (level, expected) in levels.iter().zip([-6.0, -3.0, 0.0, 3.0, 6.0]) {
        assert!((level - expected).abs() < 0.1, "{levels:?}");
    }
}
