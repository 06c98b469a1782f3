//! Station filtering, gap interpolation, height correction and scaling.
//!
//! Stages always run in the order filter, interpolate, height-correct,
//! scale. [`preprocess`] keeps a copy of each intermediate stage for audit.

use serde::{Deserialize, Serialize};

use crate::error::{AwtError, Result};

/// Temperature change per meter of altitude, in kelvin.
pub const LAPSE_RATE_K_PER_M: f64 = 0.0065;

/// A station is kept only while `missing / total` stays below this.
pub const MAX_MISSING_FRACTION: f64 = 0.10;

/// One station's samples on the shared time grid, possibly with gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStationRecord {
    pub station_id: String,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub altitude_m: Option<f64>,
    /// One array per parameter, all of grid length. `None` or a non-finite
    /// value marks a missing sample.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Complete, finite series for one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSeries {
    pub station_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_m: f64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    NoCoordinates,
    NoAltitude,
    TooManyMissing,
}

impl ExclusionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NoCoordinates => "no_coordinates",
            Self::NoAltitude => "no_altitude",
            Self::TooManyMissing => "too_many_missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub station_id: String,
    pub reason: ExclusionReason,
    /// Largest per-parameter missing fraction.
    pub missing_fraction: f64,
}

fn is_missing(v: &Option<f64>) -> bool {
    !matches!(v, Some(x) if x.is_finite())
}

fn valid_coord(v: Option<f64>) -> bool {
    v.is_some_and(f64::is_finite)
}

/// Worst missing ratio over the station's parameters, as `(missing, total)`.
fn worst_missing(record: &RawStationRecord) -> (usize, usize) {
    record
        .values
        .iter()
        .map(|s| (s.iter().filter(|v| is_missing(v)).count(), s.len()))
        // compare missing/total without division
        .max_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)))
        .unwrap_or((0, 0))
}

/// Drops stations without coordinates or altitude and stations where any
/// parameter misses 10% or more of its samples.
pub fn filter_stations(records: Vec<RawStationRecord>) -> (Vec<RawStationRecord>, Vec<Exclusion>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for record in records {
        let (missing, total) = worst_missing(&record);
        let missing_fraction = if total == 0 {
            1.0
        } else {
            missing as f64 / total as f64
        };
        let reason = if !valid_coord(record.latitude) || !valid_coord(record.longitude) {
            Some(ExclusionReason::NoCoordinates)
        } else if !valid_coord(record.altitude_m) {
            Some(ExclusionReason::NoAltitude)
        } else if record.values.is_empty() || missing * 10 >= total {
            Some(ExclusionReason::TooManyMissing)
        } else {
            None
        };
        match reason {
            Some(reason) => excluded.push(Exclusion {
                station_id: record.station_id,
                reason,
                missing_fraction,
            }),
            None => kept.push(record),
        }
    }
    (kept, excluded)
}

/// Fills interior gaps linearly between the nearest present neighbours and
/// edge gaps with the nearest present value. Present samples are copied
/// unchanged.
pub fn interpolate_missing(series: &[Option<f64>]) -> Result<Vec<f64>> {
    let present: Vec<(usize, f64)> = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|x| x.is_finite()).map(|x| (i, x)))
        .collect();
    let (&(first_i, first_v), &(last_i, last_v)) = match (present.first(), present.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(AwtError::AllMissing),
    };
    let mut out = vec![0.0; series.len()];
    out[..=first_i].fill(first_v);
    out[last_i..].fill(last_v);
    for w in present.windows(2) {
        let (i0, v0) = w[0];
        let (i1, v1) = w[1];
        out[i0] = v0;
        let span = (i1 - i0) as f64;
        for (j, slot) in out.iter_mut().enumerate().take(i1).skip(i0 + 1) {
            let frac = (j - i0) as f64 / span;
            *slot = v0 + (v1 - v0) * frac;
        }
    }
    Ok(out)
}

/// Corrects a temperature measured at altitude `z` to the mean station
/// height `mean_z`.
pub fn height_correct(t: f64, z: f64, mean_z: f64) -> f64 {
    t + LAPSE_RATE_K_PER_M * (z - mean_z)
}

/// Mean altitude of the given stations.
pub fn mean_height(records: &[RawStationRecord]) -> Result<f64> {
    let heights: Vec<f64> = records.iter().filter_map(|r| r.altitude_m).collect();
    if heights.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    Ok(heights.iter().sum::<f64>() / heights.len() as f64)
}

/// Pooled per-parameter statistics used for scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub parameter: String,
    pub mean: f64,
    pub std: f64,
}

impl ParamStats {
    pub fn scale(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Standardizes each parameter with its mean and (population) standard
/// deviation pooled over all stations and timestamps.
pub fn zscale(panels: &mut [PanelSeries], parameters: &[String]) -> Result<Vec<ParamStats>> {
    if panels.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    let mut stats = Vec::with_capacity(parameters.len());
    for (p, name) in parameters.iter().enumerate() {
        let mut count = 0usize;
        let mut sum = 0.0;
        for panel in panels.iter() {
            let series = panel.values.get(p).ok_or(AwtError::DimensionMismatch {
                expected: parameters.len(),
                found: panel.values.len(),
            })?;
            count += series.len();
            sum += series.iter().sum::<f64>();
        }
        if count == 0 {
            return Err(AwtError::EmptyInput);
        }
        let mean = sum / count as f64;
        let var = panels
            .iter()
            .flat_map(|panel| panel.values[p].iter())
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / count as f64;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(AwtError::ZeroVariance(name.clone()));
        }
        let st = ParamStats {
            parameter: name.clone(),
            mean,
            std,
        };
        for panel in panels.iter_mut() {
            for x in &mut panel.values[p] {
                *x = st.scale(*x);
            }
        }
        stats.push(st);
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    /// Names of parameters that receive height correction.
    pub temperature_parameters: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub parameters: Vec<String>,
    pub panels: Vec<PanelSeries>,
    pub exclusions: Vec<Exclusion>,
    pub mean_height_m: f64,
    pub stats: Vec<ParamStats>,
    pub interpolated: Vec<PanelSeries>,
    pub height_corrected: Vec<PanelSeries>,
}

/// Runs all stages on the records. Fails if no station survives filtering.
pub fn preprocess(
    parameters: &[String],
    records: Vec<RawStationRecord>,
    options: &PreprocessOptions,
) -> Result<Preprocessed> {
    for r in &records {
        if r.values.len() != parameters.len() {
            return Err(AwtError::DimensionMismatch {
                expected: parameters.len(),
                found: r.values.len(),
            });
        }
    }
    let (kept, exclusions) = filter_stations(records);
    if kept.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    let mean_height_m = mean_height(&kept)?;

    let interpolated = kept
        .iter()
        .map(|r| {
            Ok(PanelSeries {
                station_id: r.station_id.clone(),
                latitude: r.latitude.unwrap_or_default(),
                longitude: r.longitude.unwrap_or_default(),
                altitude_m: r.altitude_m.unwrap_or_default(),
                values: r
                    .values
                    .iter()
                    .map(|s| interpolate_missing(s))
                    .collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut height_corrected = interpolated.clone();
    for panel in &mut height_corrected {
        for (p, name) in parameters.iter().enumerate() {
            if options.temperature_parameters.iter().any(|t| t == name) {
                for t in &mut panel.values[p] {
                    *t = height_correct(*t, panel.altitude_m, mean_height_m);
                }
            }
        }
    }

    let mut panels = height_corrected.clone();
    let stats = zscale(&mut panels, parameters)?;
    Ok(Preprocessed {
        parameters: parameters.to_vec(),
        panels,
        exclusions,
        mean_height_m,
        stats,
        interpolated,
        height_corrected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(
        id: &str,
        coords: bool,
        alt: Option<f64>,
        values: Vec<Vec<Option<f64>>>,
    ) -> RawStationRecord {
        RawStationRecord {
            station_id: id.into(),
            latitude: coords.then_some(48.2),
            longitude: coords.then_some(16.37),
            altitude_m: alt,
            values,
        }
    }

    fn with_missing(total: usize, missing: usize) -> Vec<Option<f64>> {
        (0..total)
            .map(|i| {
                if i % 2 == 1 && i / 2 < missing {
                    None
                } else {
                    Some(i as f64)
                }
            })
            .collect()
    }

    #[test]
    fn missing_fraction_boundary() {
        let s99 = with_missing(1000, 99);
        let s100 = with_missing(1000, 100);
        assert_eq!(s99.iter().filter(|v| v.is_none()).count(), 99);
        assert_eq!(s100.iter().filter(|v| v.is_none()).count(), 100);
        let (kept, excl) = filter_stations(vec![
            record("ok", true, Some(100.0), vec![s99]),
            record("bad", true, Some(100.0), vec![s100]),
        ]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].station_id, "ok");
        assert_eq!(excl.len(), 1);
        assert_eq!(excl[0].station_id, "bad");
        assert_eq!(excl[0].reason, ExclusionReason::TooManyMissing);
        assert_eq!(excl[0].missing_fraction, 0.1);
    }

    #[test]
    fn rule_applies_per_parameter() {
        let good = with_missing(100, 5);
        let bad = with_missing(100, 12);
        let (kept, excl) = filter_stations(vec![record("s", true, Some(1.0), vec![good, bad])]);
        assert!(kept.is_empty());
        assert_eq!(excl[0].reason, ExclusionReason::TooManyMissing);
        assert!((excl[0].missing_fraction - 0.12).abs() < 1e-12);
    }

    #[test]
    fn missing_metadata_excluded() {
        let full = vec![vec![Some(1.0); 10]];
        let (kept, excl) = filter_stations(vec![
            record("nocoord", false, Some(1.0), full.clone()),
            record("noalt", true, None, full.clone()),
            record("nan", true, Some(f64::NAN), full.clone()),
            record("fine", true, Some(3.0), full),
        ]);
        assert_eq!(kept.len(), 1);
        let reasons: Vec<_> = excl.iter().map(|e| e.reason.as_str()).collect();
        assert_eq!(
            reasons,
            vec!["no_coordinates", "no_altitude", "no_altitude"]
        );
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(
            interpolate_missing(&[Some(1.0), None, Some(3.0)]).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            interpolate_missing(&[None, None, Some(5.0), Some(7.0)]).unwrap(),
            vec![5.0, 5.0, 5.0, 7.0]
        );
        assert_eq!(
            interpolate_missing(&[Some(4.0), None, None, Some(10.0)]).unwrap(),
            vec![4.0, 6.0, 8.0, 10.0]
        );
        assert_eq!(
            interpolate_missing(&[Some(2.0), Some(f64::NAN), None]).unwrap(),
            vec![2.0, 2.0, 2.0]
        );
        assert_eq!(
            interpolate_missing(&[None, None]),
            Err(AwtError::AllMissing)
        );
    }

    #[test]
    fn height_correction_examples() {
        assert_eq!(height_correct(10.0, 250.0, 250.0), 10.0);
        assert!((height_correct(10.0, 350.0, 250.0) - 10.65).abs() < 1e-12);
        assert!((height_correct(10.0, 50.0, 250.0) - 8.70).abs() < 1e-12);
    }

    #[test]
    fn mean_height_examples() {
        let r = |a| record("x", true, Some(a), vec![]);
        assert_eq!(mean_height(&[r(100.0)]).unwrap(), 100.0);
        assert_eq!(mean_height(&[r(100.0), r(300.0)]).unwrap(), 200.0);
        assert_eq!(mean_height(&[]), Err(AwtError::EmptyInput));
    }

    fn panel(id: &str, values: Vec<Vec<f64>>) -> PanelSeries {
        PanelSeries {
            station_id: id.into(),
            latitude: 0.0,
            longitude: 0.0,
            altitude_m: 0.0,
            values,
        }
    }

    #[test]
    fn zscale_examples() {
        let params = vec!["t".to_string(), "p".to_string()];
        let mut panels = vec![
            panel("a", vec![vec![-1.0, 1.0], vec![1000.0, 1010.0]]),
            panel("b", vec![vec![1.0, -1.0], vec![990.0, 1000.0]]),
        ];
        let stats = zscale(&mut panels, &params).unwrap();
        // t was already zero-mean unit-variance
        assert_eq!(panels[0].values[0], vec![-1.0, 1.0]);
        assert_eq!(stats[0].mean, 0.0);
        assert_eq!(stats[0].std, 1.0);
        for p in 0..2 {
            let all: Vec<f64> = panels.iter().flat_map(|x| x.values[p].clone()).collect();
            let m = all.iter().sum::<f64>() / all.len() as f64;
            let v = all.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / all.len() as f64;
            assert!(m.abs() < 1e-9);
            assert!((v.sqrt() - 1.0).abs() < 1e-9);
        }

        let mut flat = vec![panel("a", vec![vec![2.0, 2.0]])];
        assert_eq!(
            zscale(&mut flat, &["t".to_string()]),
            Err(AwtError::ZeroVariance("t".into()))
        );
    }

    #[test]
    fn full_pipeline_orders_stages() {
        let params = vec!["temperature".to_string(), "humidity".to_string()];
        let mut low_t: Vec<Option<f64>> = (0..20).map(|i| Some(10.0 + i as f64)).collect();
        low_t[1] = None;
        let high_h: Vec<Option<f64>> = (0..20).map(|i| Some(60.0 + i as f64)).collect();
        let records = vec![
            record("low", true, Some(100.0), vec![low_t, vec![Some(50.0); 20]]),
            record("high", true, Some(300.0), vec![vec![Some(8.0); 20], high_h]),
            record(
                "skip",
                false,
                Some(5000.0),
                vec![vec![Some(0.0); 20], vec![Some(0.0); 20]],
            ),
        ];
        let opts = PreprocessOptions {
            temperature_parameters: vec!["temperature".into()],
        };
        let out = preprocess(&params, records, &opts).unwrap();
        // the excluded station does not bias the mean height
        assert_eq!(out.mean_height_m, 200.0);
        assert_eq!(out.exclusions.len(), 1);
        assert_eq!(&out.interpolated[0].values[0][..3], &[10.0, 11.0, 12.0]);
        let corrected = &out.height_corrected;
        assert!((corrected[0].values[0][0] - (10.0 - 0.65)).abs() < 1e-12);
        assert!((corrected[1].values[0][0] - (8.0 + 0.65)).abs() < 1e-12);
        assert_eq!(corrected[1].values[1], out.interpolated[1].values[1]);
        for (p, st) in out.stats.iter().enumerate() {
            for (scaled, raw) in out.panels.iter().zip(corrected) {
                for (z, x) in scaled.values[p].iter().zip(&raw.values[p]) {
                    assert!((st.unscale(*z) - x).abs() <= 1e-9 * x.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn everything_excluded_is_an_error() {
        let params = vec!["t".to_string()];
        let records = vec![record("x", false, None, vec![vec![Some(1.0)]])];
        assert!(preprocess(&params, records, &PreprocessOptions::default()).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_keeps_present_samples(
            raw in prop::collection::vec(prop::option::weighted(0.7, -50.0f64..50.0), 1..80)
        ) {
            prop_assume!(raw.iter().any(|v| v.is_some()));
            let out = interpolate_missing(&raw).unwrap();
            prop_assert_eq!(out.len(), raw.len());
            for (o, r) in out.iter().zip(&raw) {
                if let Some(v) = r {
                    prop_assert_eq!(o, v);
                }
                prop_assert!(o.is_finite());
            }
        }

        #[test]
        fn height_correction_is_a_shift(
            ts in prop::collection::vec(-30.0f64..40.0, 2..50),
            z in 0.0f64..3000.0,
            mz in 0.0f64..3000.0,
        ) {
            let out: Vec<f64> = ts.iter().map(|&t| height_correct(t, z, mz)).collect();
            let shift = out[0] - ts[0];
            for (o, t) in out.iter().zip(&ts) {
                prop_assert!(((o - t) - shift).abs() < 1e-9);
            }
        }

        #[test]
        fn zscale_round_trips(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 8), 2..10)
        ) {
            let original: Vec<PanelSeries> =
                rows.iter().enumerate().map(|(i, r)| panel(&i.to_string(), vec![r.clone()])).collect();
            let mut scaled = original.clone();
            let stats = zscale(&mut scaled, &["x".to_string()]).unwrap();
            for (s, o) in scaled.iter().zip(&original) {
                for (z, x) in s.values[0].iter().zip(&o.values[0]) {
                    prop_assert!((stats[0].unscale(*z) - x).abs() <= 1e-9 * x.abs().max(1.0));
                }
            }
        }
    }
}
