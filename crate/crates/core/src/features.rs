//! Clustering features `(N, LS, SS)` and the squared distances built on them.
//!
//! Every distance in this crate is squared; thresholds compare against
//! squared tightness.

use serde::{Deserialize, Serialize};

use crate::error::{AwtError, Result};

/// Sufficient statistics of a cluster: member count, linear sum of member
/// vectors, and the sum of the members' squared norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringFeature {
    n: usize,
    ls: Vec<f64>,
    ss: f64,
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(AwtError::DimensionMismatch { expected, found })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean distance without a length check.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl ClusteringFeature {
    /// The singleton feature `(1, v, <v, v>)`.
    pub fn from_point(v: &[f64]) -> Self {
        Self {
            n: 1,
            ls: v.to_vec(),
            ss: dot(v, v),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ls(&self) -> &[f64] {
        &self.ls
    }

    pub fn ss(&self) -> f64 {
        self.ss
    }

    pub fn dim(&self) -> usize {
        self.ls.len()
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.absorb(other)?;
        Ok(out)
    }

    /// In-place merge.
    pub fn absorb(&mut self, other: &Self) -> Result<()> {
        check_dims(self.dim(), other.dim())?;
        self.n += other.n;
        for (a, b) in self.ls.iter_mut().zip(&other.ls) {
            *a += b;
        }
        self.ss += other.ss;
        Ok(())
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.ls.iter().map(|v| v / n).collect()
    }

    /// Squared average inter-cluster distance computed from the features
    /// alone: `(n1*ss2 + n2*ss1 - 2<ls1, ls2>) / (n1*n2)`.
    ///
    /// Small negative results from cancellation are clamped to zero as long
    /// as they stay within `1e-9 * (ss1 + ss2)`.
    pub fn avg_intercluster_dist_sq(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        let (n1, n2) = (self.n as f64, other.n as f64);
        let raw = (n1 * other.ss + n2 * self.ss - 2.0 * dot(&self.ls, &other.ls)) / (n1 * n2);
        if raw >= 0.0 {
            return Ok(raw);
        }
        let bound = 1e-9 * (self.ss + other.ss);
        if -raw <= bound {
            Ok(0.0)
        } else {
            Err(AwtError::NegativeDistance { value: raw, bound })
        }
    }

    /// Feature of an explicit point set.
    pub fn from_points<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let mut cf = Self::from_point(iter.next().ok_or(AwtError::EmptyInput)?);
        for p in iter {
            cf.absorb(&Self::from_point(p))?;
        }
        Ok(cf)
    }
}

/// Mean squared Euclidean distance over all cross pairs of two point sets.
///
/// This is the direct pairwise form of the average inter-cluster distance and
/// serves as the reference for [`ClusteringFeature::avg_intercluster_dist_sq`].
pub fn brute_force_avg_dist_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(AwtError::EmptyInput);
    }
    let dim = a[0].len();
    let mut total = 0.0;
    for x in a {
        check_dims(dim, x.len())?;
        for y in b {
            check_dims(dim, y.len())?;
            total += sq_dist(x, y);
        }
    }
    Ok(total / (a.len() * b.len()) as f64)
}

/// Panel distance: per-parameter squared coefficient distances, summed.
///
/// On flat prefixes this is the squared Euclidean distance of the
/// concatenated vectors.
pub fn panel_dist_sq(x: &[f64], y: &[f64]) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    Ok(sq_dist(x, y))
}
