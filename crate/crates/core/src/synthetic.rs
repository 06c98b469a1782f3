//! Planted-structure data sets: sinusoidal clusters plus isolated outliers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{AwtError, Result};
use crate::wavelet::WaveletPanel;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub clusters: usize,
    pub members: usize,
    pub length: usize,
    pub noise_sigma: f64,
    pub outliers: usize,
    /// Offset between neighbouring cluster means.
    pub separation: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            clusters: 5,
            members: 40,
            length: 128,
            noise_sigma: 0.1,
            outliers: 5,
            separation: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSet {
    pub ids: Vec<String>,
    pub series: Vec<Vec<f64>>,
    /// Planted cluster of each series; `None` for outliers.
    pub labels: Vec<Option<usize>>,
}

/// Cluster `c` follows `offset_c + sin(2 pi (c + 1) t / length + 0.9 c)`
/// with i.i.d. Gaussian noise. Outliers sit far outside the cluster offsets,
/// alternating sign, each with its own fast oscillation.
pub fn planted_sinusoids(config: &PlantedConfig, seed: u64) -> Result<PlantedSet> {
    if config.length == 0 || config.clusters == 0 && config.outliers == 0 {
        return Err(AwtError::EmptyInput);
    }
    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| AwtError::InvalidConfig(format!("noise sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = config.length as f64;
    let tau = std::f64::consts::TAU;
    let centre = (config.clusters as f64 - 1.0) / 2.0;

    let mut set = PlantedSet {
        ids: Vec::new(),
        series: Vec::new(),
        labels: Vec::new(),
    };
    for c in 0..config.clusters {
        let offset = config.separation * (c as f64 - centre);
        let freq = (c + 1) as f64;
        for m in 0..config.members {
            let s = (0..config.length)
                .map(|t| {
                    offset
                        + (tau * freq * t as f64 / len + 0.9 * c as f64).sin()
                        + noise.sample(&mut rng)
                })
                .collect();
            set.ids.push(format!("c{c}_m{m:03}"));
            set.series.push(s);
            set.labels.push(Some(c));
        }
    }
    let reach = config.separation * (centre + 1.0);
    for j in 0..config.outliers {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let offset = sign * (reach + config.separation * (3.0 + 2.0 * j as f64));
        let freq = (7 + 3 * j) as f64;
        let s = (0..config.length)
            .map(|t| offset + 3.0 * (tau * freq * t as f64 / len).sin() + noise.sample(&mut rng))
            .collect();
        set.ids.push(format!("outlier{j}"));
        set.series.push(s);
        set.labels.push(None);
    }
    Ok(set)
}

impl PlantedSet {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Seeded permutation of the indices, for insertion-order studies.
    pub fn shuffled_order(&self, seed: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order
    }

    /// Single-parameter panels in the given index order.
    pub fn panels_in_order(&self, order: &[usize]) -> Result<Vec<WaveletPanel>> {
        order
            .iter()
            .map(|&i| WaveletPanel::from_series(self.ids[i].clone(), &[self.series[i].clone()]))
            .collect()
    }

    pub fn panels(&self) -> Result<Vec<WaveletPanel>> {
        self.panels_in_order(&(0..self.len()).collect::<Vec<_>>())
    }
}
