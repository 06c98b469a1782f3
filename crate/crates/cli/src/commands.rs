use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use awt_core::evaluate::cluster_mean_series;
use awt_core::preprocess::{filter_stations, preprocess as run_preprocess, PreprocessOptions};
use awt_core::synthetic::{planted_sinusoids, PlantedConfig};
use awt_core::wavelet::level_count_for;
use awt_core::{
    build_cf_tree, count_clusters_for_threshold, nmi, resolution_study, run, AwtConfig,
    LabelAssignment, WaveletPanel,
};
use chrono::{Duration, TimeZone, Utc};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::files::{self, InputDigest, PanelFile, ResultFile, RunManifest};
use crate::ingest::{self, format_timestamp, HEADER};
use crate::{ClusterArgs, EvaluateArgs, PreprocessArgs, SweepArgs, SynthArgs};

pub fn preprocess(args: &PreprocessArgs) -> CliResult<()> {
    let file = File::open(&args.input)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.input.display())))?;
    let raw = ingest::read_long_csv(BufReader::new(file))?;
    let timestamps: Vec<String> = raw.timestamps.iter().map(format_timestamp).collect();
    info!(
        "read {} stations, {} parameters, {} hourly samples",
        raw.stations.len(),
        raw.parameters.len(),
        timestamps.len()
    );

    let (kept, exclusions) = filter_stations(raw.stations.clone());
    if kept.is_empty() {
        let empty = PanelFile {
            format: files::PANEL_FORMAT.into(),
            parameters: raw.parameters,
            timestamps,
            mean_height_m: None,
            scaling: Vec::new(),
            stations: Vec::new(),
        };
        files::write_bytes(&args.output, &files::to_json(&empty)?)?;
        files::write_bytes(&args.exclusions, &files::exclusions_csv(&exclusions)?)?;
        println!("kept 0 stations, excluded {}", exclusions.len());
        return Err(CliError::data(
            "every station was excluded; see the exclusion report",
        ));
    }

    let options = PreprocessOptions {
        temperature_parameters: args.temperature_params.clone(),
    };
    for t in &options.temperature_parameters {
        if !raw.parameters.contains(t) {
            warn!("temperature parameter `{t}` does not occur in the input");
        }
    }
    let done = run_preprocess(&raw.parameters, raw.stations, &options)?;

    if let Some(dir) = &args.audit_dir {
        files::write_bytes(
            &dir.join("1_interpolated.json"),
            &files::to_json(&done.interpolated)?,
        )?;
        files::write_bytes(
            &dir.join("2_height_corrected.json"),
            &files::to_json(&done.height_corrected)?,
        )?;
        files::write_bytes(&dir.join("3_scaled.json"), &files::to_json(&done.panels)?)?;
    }

    let panel_file = PanelFile {
        format: files::PANEL_FORMAT.into(),
        parameters: done.parameters,
        timestamps,
        mean_height_m: Some(done.mean_height_m),
        scaling: done.stats,
        stations: done.panels,
    };
    files::write_bytes(&args.output, &files::to_json(&panel_file)?)?;
    files::write_bytes(&args.exclusions, &files::exclusions_csv(&done.exclusions)?)?;
    println!(
        "kept {} stations, excluded {}",
        panel_file.stations.len(),
        done.exclusions.len()
    );
    Ok(())
}

struct LoadedPanels {
    file: PanelFile,
    digest: InputDigest,
}

fn load_panels(path: &Path) -> CliResult<LoadedPanels> {
    let bytes = files::read_bytes(path)?;
    let file: PanelFile = files::parse_json(&bytes, path, files::PANEL_FORMAT)?;
    Ok(LoadedPanels {
        file,
        digest: InputDigest {
            path: path.display().to_string(),
            sha256: files::sha256_hex(&bytes),
        },
    })
}

fn available_levels(panels: &PanelFile) -> CliResult<usize> {
    if panels.stations.is_empty() || panels.timestamps.is_empty() {
        return Err(CliError::data("panel file contains no stations"));
    }
    Ok(level_count_for(panels.timestamps.len().next_power_of_two()))
}

/// Wavelet panels in insertion order: file order, or a seeded shuffle.
fn ordered_panels(panels: &PanelFile, seed: Option<u64>) -> CliResult<Vec<WaveletPanel>> {
    let mut out = panels.to_wavelet_panels()?;
    if let Some(seed) = seed {
        out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(out)
}

fn validated(config: AwtConfig, panels: &PanelFile) -> CliResult<AwtConfig> {
    let available = available_levels(panels)?;
    config.validate(available)?;
    Ok(config)
}

pub fn cluster(args: &ClusterArgs) -> CliResult<()> {
    let started_at = Utc::now();
    let clock = Instant::now();
    let loaded = load_panels(&args.panels)?;
    let config = validated(args.config.config(), &loaded.file)?;
    let seed = args.config.seed_shuffle;
    let panels = ordered_panels(&loaded.file, seed)?;

    let mut result = run(&panels, &config)?;
    result.mean_series = cluster_mean_series(&result, &panels, Some(&loaded.file.scaling))?;
    info!(
        "k={} leaves={} final resolution {} of {}",
        result.k, result.tree_leaf_count, result.final_resolution, result.available_levels
    );

    let result_file = ResultFile {
        format: files::RESULT_FORMAT.into(),
        input_digest: loaded.digest.sha256.clone(),
        seed_shuffle: seed,
        conventions: Default::default(),
        parameters: loaded.file.parameters.clone(),
        timestamps: loaded.file.timestamps.clone(),
        result,
    };
    let result = &result_file.result;

    let mut outputs = vec![
        ("result.json", files::to_json(&result_file)?),
        ("sizes.csv", files::sizes_csv(result)?),
        (
            "mean_series.csv",
            files::mean_series_csv(
                &result.mean_series,
                &result_file.parameters,
                &result_file.timestamps,
            )?,
        ),
    ];
    for (name, bytes) in &outputs {
        files::write_bytes(&args.out_dir.join(name), bytes)?;
    }
    if let Some(path) = &args.dump_tree {
        let tree = build_cf_tree(&panels, &config)?;
        let dump = tree.dump_json() + "\n";
        files::write_bytes(path, dump.as_bytes())?;
        outputs.push(("cf_tree", dump.into_bytes()));
    }

    let manifest = RunManifest {
        format: files::MANIFEST_FORMAT.into(),
        software_version: env!("CARGO_PKG_VERSION").into(),
        command: std::env::args().collect::<Vec<_>>().join(" "),
        config,
        seed_shuffle: seed,
        inputs: vec![loaded.digest],
        outputs: outputs
            .iter()
            .map(|(name, bytes)| InputDigest {
                path: match (*name, &args.dump_tree) {
                    ("cf_tree", Some(p)) => p.display().to_string(),
                    _ => args.out_dir.join(name).display().to_string(),
                },
                sha256: files::sha256_hex(bytes),
            })
            .collect(),
        started_at: started_at.to_rfc3339(),
        elapsed_ms: clock.elapsed().as_millis(),
        k: result.k,
        outlier_clusters: result.outlier_cluster_count(),
        outlier_stations: result.outlier_count,
    };
    files::write_bytes(
        &args.out_dir.join("manifest.json"),
        &files::to_json(&manifest)?,
    )?;

    println!(
        "k={} outlier_clusters={} outlier_stations={}",
        result.k,
        result.outlier_cluster_count(),
        result.outlier_count
    );
    Ok(())
}

fn load_result(path: &Path) -> CliResult<ResultFile> {
    let bytes = files::read_bytes(path)?;
    files::parse_json(&bytes, path, files::RESULT_FORMAT)
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(path) => files::write_bytes(path, bytes),
        None => io::stdout().write_all(bytes).map_err(CliError::internal),
    }
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let first = load_result(&args.first)?;
    if let Some(second) = &args.second {
        let second = load_result(second)?;
        let score = nmi(
            &LabelAssignment::from(&first.result),
            &LabelAssignment::from(&second.result),
        )?;
        println!("{score}");
        return Ok(());
    }
    let (Some(panels_path), Some(grid)) = (&args.panels, &args.drop_grid) else {
        return Err(CliError::Usage(
            "give a second result file, or --panels with --drop-grid".into(),
        ));
    };
    let loaded = load_panels(panels_path)?;
    if loaded.digest.sha256 != first.input_digest {
        warn!(
            "{} is not the panel file {} was computed from",
            panels_path.display(),
            args.first.display()
        );
    }
    let config = validated(first.result.config.clone(), &loaded.file)?;
    let available = available_levels(&loaded.file)?;
    for &d in grid {
        AwtConfig {
            drop_levels: d,
            ..config.clone()
        }
        .validate(available)?;
    }
    let panels = ordered_panels(&loaded.file, first.seed_shuffle)?;
    let rows = resolution_study(&panels, &config, grid)?;
    emit(args.output.as_deref(), &files::study_csv(&rows)?)
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let loaded = load_panels(&args.panels)?;
    let config = validated(args.config.config(), &loaded.file)?;
    let panels = ordered_panels(&loaded.file, args.config.seed_shuffle)?;
    let rows = count_clusters_for_threshold(&panels, &args.thresholds, &config)?;
    emit(args.output.as_deref(), &files::sweep_csv(&rows)?)
}

/// Planted clusters around 10 degrees at roughly equal altitude, plus one
/// station without coordinates and one with too many gaps.
pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let set = planted_sinusoids(&PlantedConfig::default(), args.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ 0x5eed);
    let start = Utc
        .with_ymd_and_hms(2018, 9, 1, 0, 0, 0)
        .single()
        .expect("valid start time");
    let stamps: Vec<String> = (0..PlantedConfig::default().length as i64)
        .map(|h| format_timestamp(&(start + Duration::hours(h))))
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).map_err(CliError::internal)?;
    let write_station = |w: &mut csv::Writer<Vec<u8>>,
                         id: &str,
                         coords: Option<(f64, f64, f64)>,
                         values: &[Option<f64>]|
     -> CliResult<()> {
        let (lat, lon, alt) = match coords {
            Some((a, b, c)) => (format!("{a:.4}"), format!("{b:.4}"), format!("{c:.1}")),
            None => (String::new(), String::new(), "180.0".into()),
        };
        for (t, v) in stamps.iter().zip(values) {
            let v = v.map_or(String::new(), |v| format!("{v:.6}"));
            w.write_record([id, &lat, &lon, &alt, t, "temperature", &v])
                .map_err(CliError::internal)?;
        }
        Ok(())
    };

    for (id, series) in set.ids.iter().zip(&set.series) {
        let coords = (
            48.2 + rng.random_range(-0.1..0.1),
            16.4 + rng.random_range(-0.1..0.1),
            200.0 + rng.random_range(-5.0..5.0),
        );
        let mut values: Vec<Option<f64>> = series.iter().map(|x| Some(10.0 + x)).collect();
        // a few interior and edge gaps, well under the exclusion limit
        for _ in 0..rng.random_range(0..4) {
            let i = rng.random_range(0..values.len());
            values[i] = None;
        }
        write_station(&mut w, id, Some(coords), &values)?;
    }
    let flat: Vec<Option<f64>> = (0..stamps.len())
        .map(|i| Some(10.0 + (i % 24) as f64 / 24.0))
        .collect();
    write_station(&mut w, "no_coordinates", None, &flat)?;
    let sparse: Vec<Option<f64>> = flat
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { *v } else { None })
        .collect();
    write_station(&mut w, "sparse", Some((48.25, 16.35, 201.0)), &sparse)?;

    let bytes = w.into_inner().map_err(CliError::internal)?;
    files::write_bytes(&args.output, &bytes)?;
    println!(
        "wrote {} stations to {}",
        set.len() + 2,
        args.output.display()
    );
    Ok(())
}
