//! On-disk formats written and read by the CLI.

use std::fs;
use std::io::Write;
use std::path::Path;

use awt_core::evaluate::ClusterMeanSeries;
use awt_core::preprocess::Exclusion;
use awt_core::{AwtConfig, ClusteringResult, PanelSeries, ParamStats, WaveletPanel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const PANEL_FORMAT: &str = "awt-panels/1";
pub const RESULT_FORMAT: &str = "awt-result/1";
pub const MANIFEST_FORMAT: &str = "awt-manifest/1";

/// Preprocessed, z-scaled station data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelFile {
    pub format: String,
    pub parameters: Vec<String>,
    pub timestamps: Vec<String>,
    /// `None` when every station was excluded.
    pub mean_height_m: Option<f64>,
    pub scaling: Vec<ParamStats>,
    pub stations: Vec<PanelSeries>,
}

impl PanelFile {
    pub fn to_wavelet_panels(&self) -> CliResult<Vec<WaveletPanel>> {
        if self.stations.is_empty() {
            return Err(CliError::data("panel file contains no stations"));
        }
        self.stations
            .iter()
            .map(|s| {
                if s.values.len() != self.parameters.len()
                    || s.values.iter().any(|v| v.len() != self.timestamps.len())
                {
                    return Err(CliError::data(format!(
                        "station `{}` does not match the panel shape ({} parameters x {} timestamps)",
                        s.station_id,
                        self.parameters.len(),
                        self.timestamps.len()
                    )));
                }
                Ok(WaveletPanel::from_series(s.station_id.clone(), &s.values)?)
            })
            .collect()
    }
}

/// How distances and scores in a result are to be read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub threshold_units: String,
    pub nmi_variant: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            threshold_units: "squared euclidean distance on z-scaled values".into(),
            nmi_variant: "I(A;B)/sqrt(H(A)H(B)), natural log".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format: String,
    /// SHA-256 of the panel file the run consumed.
    pub input_digest: String,
    pub seed_shuffle: Option<u64>,
    pub conventions: Conventions,
    pub parameters: Vec<String>,
    pub timestamps: Vec<String>,
    pub result: ClusteringResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a run, plus the only wall-clock data the
/// CLI emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub software_version: String,
    pub command: String,
    pub config: AwtConfig,
    pub seed_shuffle: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<InputDigest>,
    pub started_at: String,
    pub elapsed_ms: u128,
    pub k: usize,
    pub outlier_clusters: usize,
    pub outlier_stations: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(bytes: &[u8], path: &Path, format: &str) -> CliResult<T> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| CliError::data(format!("{}: invalid JSON: {e}", path.display())))?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == format => {}
        other => {
            return Err(CliError::data(format!(
                "{}: expected format `{format}`, found {other:?}",
                path.display()
            )))
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(bytes)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(CliError::internal)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes<F>(header: &[&str], fill: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(CliError::internal)?;
    fill(&mut w).map_err(CliError::internal)?;
    w.into_inner().map_err(CliError::internal)
}

pub fn exclusions_csv(exclusions: &[Exclusion]) -> CliResult<Vec<u8>> {
    csv_bytes(&["station_id", "reason", "missing_fraction"], |w| {
        for e in exclusions {
            w.write_record([
                e.station_id.as_str(),
                e.reason.as_str(),
                &e.missing_fraction.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// One row per cluster, largest first; empty clusters come last.
pub fn sizes_csv(result: &ClusteringResult) -> CliResult<Vec<u8>> {
    let mut rows: Vec<_> = result.clusters.iter().collect();
    rows.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then(a.cluster_id.cmp(&b.cluster_id))
    });
    csv_bytes(&["cluster_id", "size", "is_outlier"], |w| {
        for c in rows {
            w.write_record([
                c.cluster_id.to_string(),
                c.members.len().to_string(),
                c.is_outlier.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn mean_series_csv(
    series: &[ClusterMeanSeries],
    parameters: &[String],
    timestamps: &[String],
) -> CliResult<Vec<u8>> {
    csv_bytes(&["cluster_id", "parameter", "timestamp", "value"], |w| {
        for s in series {
            for (p, values) in s.per_parameter.iter().enumerate() {
                for (t, v) in values.iter().enumerate() {
                    w.write_record([
                        s.cluster_id.to_string(),
                        parameters[p].clone(),
                        timestamps[t].clone(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

pub fn study_csv(rows: &[awt_core::StudyRow]) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["tree_levels", "max_resolution", "drop_levels", "k", "nmi"],
        |w| {
            for r in rows {
                w.write_record([
                    r.tree_levels.to_string(),
                    r.max_resolution.to_string(),
                    r.drop_levels.to_string(),
                    r.k.to_string(),
                    r.nmi.to_string(),
                ])?;
            }
            Ok(())
        },
    )
}

pub fn sweep_csv(rows: &[(f64, usize)]) -> CliResult<Vec<u8>> {
    csv_bytes(&["threshold", "k"], |w| {
        for (t, k) in rows {
            w.write_record([t.to_string(), k.to_string()])?;
        }
        Ok(())
    })
}
