//! Long-format station CSV:
//! `station_id,latitude,longitude,altitude_m,timestamp,parameter,value`.
//!
//! Timestamps are RFC 3339 and must fall on whole UTC hours; the grid spans
//! the earliest to the latest timestamp in the file. A value that is empty,
//! `NaN`, or simply absent from the file counts as missing.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use awt_core::RawStationRecord;
use chrono::{DateTime, Duration, SecondsFormat, Timelike, Utc};

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 7] = [
    "station_id",
    "latitude",
    "longitude",
    "altitude_m",
    "timestamp",
    "parameter",
    "value",
];

#[derive(Debug, Clone)]
pub struct RawDataset {
    pub parameters: Vec<String>,
    pub timestamps: Vec<DateTime<Utc>>,
    /// Stations in order of first appearance.
    pub stations: Vec<RawStationRecord>,
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn field_error(line: u64, field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::data(format!("line {line}, field `{field}`: {msg}"))
}

fn parse_optional(raw: &str, line: u64, field: &str) -> CliResult<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || raw == "NaN" {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| field_error(line, field, format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(field_error(line, field, format!("`{raw}` is not finite")));
    }
    Ok(Some(v))
}

struct StationAcc {
    lat: Option<f64>,
    lon: Option<f64>,
    alt: Option<f64>,
    // (timestamp, parameter) -> value
    samples: HashMap<(DateTime<Utc>, String), Option<f64>>,
}

fn merge_meta(slot: &mut Option<f64>, new: Option<f64>, line: u64, field: &str) -> CliResult<()> {
    match (*slot, new) {
        (Some(old), Some(v)) if old != v => Err(field_error(
            line,
            field,
            format!("conflicts with earlier value {old}"),
        )),
        (None, Some(v)) => {
            *slot = Some(v);
            Ok(())
        }
        _ => Ok(()),
    }
}

pub fn read_long_csv<R: Read>(input: R) -> CliResult<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| CliError::data(format!("line 1: {e}")))?
        .clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(CliError::data(format!(
            "line 1: expected header `{}`, found `{}`",
            HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut order: Vec<String> = Vec::new();
    let mut stations: HashMap<String, StationAcc> = HashMap::new();
    let mut parameters = BTreeSet::new();
    let mut first: Option<DateTime<Utc>> = None;
    let mut last: Option<DateTime<Utc>> = None;

    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::data(format!("line {line}: malformed CSV: {e}"))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let id = &row[0];
        if id.is_empty() {
            return Err(field_error(line, "station_id", "empty"));
        }
        let lat = parse_optional(&row[1], line, "latitude")?;
        let lon = parse_optional(&row[2], line, "longitude")?;
        let alt = parse_optional(&row[3], line, "altitude_m")?;
        let ts = DateTime::parse_from_rfc3339(&row[4])
            .map_err(|e| field_error(line, "timestamp", format!("`{}`: {e}", &row[4])))?
            .with_timezone(&Utc);
        if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(field_error(line, "timestamp", "not on the hourly grid"));
        }
        let parameter = row[5].to_string();
        if parameter.is_empty() {
            return Err(field_error(line, "parameter", "empty"));
        }
        let value = parse_optional(&row[6], line, "value")?;

        first = Some(first.map_or(ts, |f| f.min(ts)));
        last = Some(last.map_or(ts, |l| l.max(ts)));
        parameters.insert(parameter.clone());

        let acc = stations.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            StationAcc {
                lat: None,
                lon: None,
                alt: None,
                samples: HashMap::new(),
            }
        });
        merge_meta(&mut acc.lat, lat, line, "latitude")?;
        merge_meta(&mut acc.lon, lon, line, "longitude")?;
        merge_meta(&mut acc.alt, alt, line, "altitude_m")?;
        if acc.samples.insert((ts, parameter), value).is_some() {
            return Err(CliError::data(format!(
                "line {line}: duplicate sample for station `{id}` at {}",
                &row[4]
            )));
        }
    }

    let (Some(first), Some(last)) = (first, last) else {
        return Err(CliError::data("input has no data rows"));
    };
    let hours = (last - first).num_hours();
    let timestamps: Vec<DateTime<Utc>> = (0..=hours).map(|h| first + Duration::hours(h)).collect();
    let parameters: Vec<String> = parameters.into_iter().collect();

    let stations = order
        .into_iter()
        .map(|id| {
            let acc = stations.remove(&id).expect("station recorded");
            let values = parameters
                .iter()
                .map(|p| {
                    timestamps
                        .iter()
                        .map(|t| acc.samples.get(&(*t, p.clone())).copied().flatten())
                        .collect()
                })
                .collect();
            RawStationRecord {
                station_id: id,
                latitude: acc.lat,
                longitude: acc.lon,
                altitude_m: acc.alt,
                values,
            }
        })
        .collect();

    Ok(RawDataset {
        parameters,
        timestamps,
        stations,
    })
}
