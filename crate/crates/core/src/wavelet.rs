//! Orthonormal Haar decomposition with coarsest-first level storage.
//!
//! Level 0 holds the single scaling coefficient, level `l >= 1` holds
//! `2^(l-1)` detail coefficients. Because the transform is orthonormal the
//! squared distance between two full coefficient sets equals the squared
//! distance between the padded samples, and every prefix of levels is a
//! coarser approximation of the same series.

use serde::{Deserialize, Serialize};

use crate::error::{AwtError, Result};

/// Number of coefficients in the first `levels` levels of one series.
pub fn prefix_len(levels: usize) -> usize {
    if levels == 0 {
        0
    } else {
        1 << (levels - 1)
    }
}

/// Number of levels produced by decomposing a series of dyadic length `len`.
pub fn level_count_for(len: usize) -> usize {
    debug_assert!(len.is_power_of_two());
    len.trailing_zeros() as usize + 1
}

fn check_finite(series: &[f64]) -> Result<()> {
    match series.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(AwtError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Extends `series` to the next power of two by repeating its last value.
///
/// Returns the padded samples together with the original length.
pub fn pad_to_pow2(series: &[f64]) -> Result<(Vec<f64>, usize)> {
    let last = *series.last().ok_or(AwtError::EmptyInput)?;
    check_finite(series)?;
    let target = series.len().next_power_of_two();
    let mut out = Vec::with_capacity(target);
    out.extend_from_slice(series);
    out.resize(target, last);
    Ok((out, series.len()))
}

/// Haar coefficients of one series, coarsest level first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoefficients {
    levels: Vec<Vec<f64>>,
    original_length: usize,
    padded_length: usize,
}

impl WaveletCoefficients {
    /// Builds a coefficient set from raw parts, checking the level shapes.
    ///
    /// Fewer levels than `padded_length` supports is accepted: this is the
    /// shape left behind by [`WaveletCoefficients::drop_finest_levels`], and
    /// reconstruction treats the missing details as zero.
    pub fn from_levels(
        levels: Vec<Vec<f64>>,
        original_length: usize,
        padded_length: usize,
    ) -> Result<Self> {
        if padded_length == 0 || !padded_length.is_power_of_two() {
            return Err(AwtError::Structure(format!(
                "padded length {padded_length} is not a power of two"
            )));
        }
        if original_length == 0 || original_length > padded_length {
            return Err(AwtError::Structure(format!(
                "original length {original_length} not in 1..={padded_length}"
            )));
        }
        let full = level_count_for(padded_length);
        if levels.is_empty() || levels.len() > full {
            return Err(AwtError::Structure(format!(
                "{} levels given, expected 1..={full}",
                levels.len()
            )));
        }
        for (l, level) in levels.iter().enumerate() {
            let want = if l == 0 { 1 } else { 1 << (l - 1) };
            if level.len() != want {
                return Err(AwtError::Structure(format!(
                    "level {l} has {} coefficients, expected {want}",
                    level.len()
                )));
            }
        }
        Ok(Self {
            levels,
            original_length,
            padded_length,
        })
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn padded_length(&self) -> usize {
        self.padded_length
    }

    /// True when no levels have been dropped.
    pub fn is_complete(&self) -> bool {
        self.levels.len() == level_count_for(self.padded_length)
    }

    pub fn coefficient_count(&self) -> usize {
        prefix_len(self.levels.len())
    }

    /// Appends the first `levels` levels to `out`, coarsest first.
    pub fn extend_prefix(&self, levels: usize, out: &mut Vec<f64>) -> Result<()> {
        if levels == 0 || levels > self.levels.len() {
            return Err(AwtError::LevelRange {
                requested: levels,
                available: self.levels.len(),
            });
        }
        for level in &self.levels[..levels] {
            out.extend_from_slice(level);
        }
        Ok(())
    }

    /// Removes the `d` finest levels.
    pub fn drop_finest_levels(&self, d: usize) -> Result<Self> {
        if d >= self.levels.len() {
            return Err(AwtError::LevelRange {
                requested: d,
                available: self.levels.len(),
            });
        }
        Ok(Self {
            levels: self.levels[..self.levels.len() - d].to_vec(),
            original_length: self.original_length,
            padded_length: self.padded_length,
        })
    }
}

/// Orthonormal Haar transform of a series whose length is a power of two.
pub fn haar_decompose(series: &[f64]) -> Result<WaveletCoefficients> {
    if series.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    if !series.len().is_power_of_two() {
        return Err(AwtError::NonDyadicLength(series.len()));
    }
    check_finite(series)?;

    let mut approx = series.to_vec();
    // details[0] is the finest level
    let mut details: Vec<Vec<f64>> = Vec::new();
    while approx.len() > 1 {
        let half = approx.len() / 2;
        let mut sums = Vec::with_capacity(half);
        let mut diffs = Vec::with_capacity(half);
        for pair in approx.chunks_exact(2) {
            sums.push((pair[0] + pair[1]) * std::f64::consts::FRAC_1_SQRT_2);
            diffs.push((pair[0] - pair[1]) * std::f64::consts::FRAC_1_SQRT_2);
        }
        details.push(diffs);
        approx = sums;
    }

    let mut levels = Vec::with_capacity(details.len() + 1);
    levels.push(approx);
    levels.extend(details.into_iter().rev());
    Ok(WaveletCoefficients {
        levels,
        original_length: series.len(),
        padded_length: series.len(),
    })
}

/// Pads `series` with [`pad_to_pow2`] and decomposes it, remembering the
/// original length so reconstruction returns only the real samples.
pub fn decompose_series(series: &[f64]) -> Result<WaveletCoefficients> {
    let (padded, original_length) = pad_to_pow2(series)?;
    let mut coeffs = haar_decompose(&padded)?;
    coeffs.original_length = original_length;
    Ok(coeffs)
}

/// Inverse transform; returns the first `original_length` samples.
///
/// Levels missing at the fine end are treated as zero, which yields the
/// piecewise-constant approximation at the retained resolution.
pub fn haar_reconstruct(coeffs: &WaveletCoefficients) -> Result<Vec<f64>> {
    // re-validate: fields may come from deserialized input
    let coeffs = WaveletCoefficients::from_levels(
        coeffs.levels.clone(),
        coeffs.original_length,
        coeffs.padded_length,
    )?;
    let mut approx = coeffs.levels[0].clone();
    let full = level_count_for(coeffs.padded_length);
    for l in 1..full {
        let detail = coeffs.levels.get(l);
        let mut next = Vec::with_capacity(approx.len() * 2);
        for (i, s) in approx.iter().enumerate() {
            let d = detail.map_or(0.0, |d| d[i]);
            next.push((s + d) * std::f64::consts::FRAC_1_SQRT_2);
            next.push((s - d) * std::f64::consts::FRAC_1_SQRT_2);
        }
        approx = next;
    }
    approx.truncate(coeffs.original_length);
    Ok(approx)
}

/// Wavelet coefficients of every parameter measured at one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletPanel {
    station_id: String,
    per_parameter: Vec<WaveletCoefficients>,
}

impl WaveletPanel {
    pub fn new(
        station_id: impl Into<String>,
        per_parameter: Vec<WaveletCoefficients>,
    ) -> Result<Self> {
        let first = per_parameter.first().ok_or(AwtError::EmptyInput)?;
        for other in &per_parameter[1..] {
            if other.padded_length != first.padded_length
                || other.levels.len() != first.levels.len()
            {
                return Err(AwtError::Structure(
                    "parameters of one panel must share level structure".into(),
                ));
            }
        }
        Ok(Self {
            station_id: station_id.into(),
            per_parameter,
        })
    }

    /// Decomposes each parameter series of one station.
    pub fn from_series(station_id: impl Into<String>, series: &[Vec<f64>]) -> Result<Self> {
        let coeffs = series
            .iter()
            .map(|s| decompose_series(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(station_id, coeffs)
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn parameters(&self) -> &[WaveletCoefficients] {
        &self.per_parameter
    }

    pub fn parameter_count(&self) -> usize {
        self.per_parameter.len()
    }

    pub fn level_count(&self) -> usize {
        self.per_parameter[0].level_count()
    }

    pub fn padded_length(&self) -> usize {
        self.per_parameter[0].padded_length
    }

    pub fn original_length(&self) -> usize {
        self.per_parameter[0].original_length
    }

    /// Concatenation over parameters of levels `0..levels`.
    pub fn prefix_flat(&self, levels: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.per_parameter.len() * prefix_len(levels));
        for p in &self.per_parameter {
            p.extend_prefix(levels, &mut out)?;
        }
        Ok(out)
    }

    pub fn drop_finest_levels(&self, d: usize) -> Result<Self> {
        Ok(Self {
            station_id: self.station_id.clone(),
            per_parameter: self
                .per_parameter
                .iter()
                .map(|p| p.drop_finest_levels(d))
                .collect::<Result<_>>()?,
        })
    }

    /// Time-domain series per parameter (unpadded).
    pub fn reconstruct(&self) -> Result<Vec<Vec<f64>>> {
        self.per_parameter.iter().map(haar_reconstruct).collect()
    }
}

/// Checks that all panels share parameter count and level structure.
pub fn check_uniform(panels: &[WaveletPanel]) -> Result<()> {
    let first = panels.first().ok_or(AwtError::EmptyInput)?;
    for p in &panels[1..] {
        if p.parameter_count() != first.parameter_count()
            || p.level_count() != first.level_count()
            || p.padded_length() != first.padded_length()
            || p.original_length() != first.original_length()
        {
            return Err(AwtError::Structure(format!(
                "panel `{}` does not match the structure of `{}`",
                p.station_id(),
                first.station_id()
            )));
        }
    }
    Ok(())
}
