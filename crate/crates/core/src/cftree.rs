//! Clustering-feature tree built in a single pass over the points.
//!
//! The root is always an internal node once the tree holds a point; leaves are
//! the finest clusters and remember which point ids they contain. Ties are
//! broken by lowest index everywhere, so identical insertion orders give
//! identical trees.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{AwtError, Result};
use crate::features::{sq_dist, ClusteringFeature};

pub const DEFAULT_BRANCHING_FACTOR: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfNode {
    cf: ClusteringFeature,
    children: Vec<CfNode>,
    member_ids: Vec<usize>,
}

impl CfNode {
    fn leaf(id: usize, v: &[f64]) -> Self {
        Self {
            cf: ClusteringFeature::from_point(v),
            children: Vec::new(),
            member_ids: vec![id],
        }
    }

    fn internal(children: Vec<CfNode>) -> Result<Self> {
        let cf = fold_cfs(&children)?;
        Ok(Self {
            cf,
            children,
            member_ids: Vec::new(),
        })
    }

    pub fn cf(&self) -> &ClusteringFeature {
        &self.cf
    }

    pub fn children(&self) -> &[CfNode] {
        &self.children
    }

    pub fn member_ids(&self) -> &[usize] {
        &self.member_ids
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Splits an over-full internal node into two.
    ///
    /// The pair of children with the largest average inter-cluster distance
    /// seeds the two halves; every other child joins the nearer seed (first
    /// seed on ties).
    pub fn split(self) -> Result<(CfNode, CfNode)> {
        if self.is_leaf() {
            return Err(AwtError::Structure("cannot split a leaf".into()));
        }
        if self.children.len() < 2 {
            return Err(AwtError::Structure(
                "split needs at least two children".into(),
            ));
        }
        let children = self.children;
        let mut seeds = (0, 1);
        let mut best = f64::NEG_INFINITY;
        for i in 0..children.len() {
            for j in i + 1..children.len() {
                let d = children[i].cf.avg_intercluster_dist_sq(&children[j].cf)?;
                if d > best {
                    best = d;
                    seeds = (i, j);
                }
            }
        }
        let (s1, s2) = seeds;
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut to_first = Vec::with_capacity(children.len());
        for (i, child) in children.iter().enumerate() {
            let side = if i == s1 {
                true
            } else if i == s2 {
                false
            } else {
                let d1 = child.cf.avg_intercluster_dist_sq(&children[s1].cf)?;
                let d2 = child.cf.avg_intercluster_dist_sq(&children[s2].cf)?;
                d1 <= d2
            };
            to_first.push(side);
        }
        for (child, side) in children.into_iter().zip(to_first) {
            if side {
                first.push(child);
            } else {
                second.push(child);
            }
        }
        Ok((CfNode::internal(first)?, CfNode::internal(second)?))
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a CfNode>) {
        if self.is_leaf() {
            out.push(self);
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    fn write_text(&self, depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth);
        if self.is_leaf() {
            let _ = writeln!(
                out,
                "{indent}leaf n={} ids={:?}",
                self.cf.n(),
                self.member_ids
            );
        } else {
            let _ = writeln!(
                out,
                "{indent}node n={} children={}",
                self.cf.n(),
                self.children.len()
            );
            for c in &self.children {
                c.write_text(depth + 1, out);
            }
        }
    }
}

fn fold_cfs(nodes: &[CfNode]) -> Result<ClusteringFeature> {
    let mut iter = nodes.iter();
    let mut cf = iter
        .next()
        .ok_or_else(|| AwtError::Structure("internal node without children".into()))?
        .cf
        .clone();
    for n in iter {
        cf.absorb(&n.cf)?;
    }
    Ok(cf)
}

/// Index of the child whose centroid is nearest to `v`; lowest index on ties.
fn closest_child(children: &[CfNode], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in children.iter().enumerate() {
        let d = sq_dist(&c.cf.centroid(), v);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// One leaf of a finished tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafCluster {
    pub cf: ClusteringFeature,
    pub member_ids: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CfTree {
    root: Option<CfNode>,
    threshold: f64,
    branching_factor: usize,
    dimensionality: usize,
    #[serde(skip)]
    seen: HashSet<usize>,
}

impl CfTree {
    /// `threshold` is in squared-distance units.
    pub fn new(threshold: f64, branching_factor: usize, dimensionality: usize) -> Result<Self> {
        if !(threshold > 0.0) {
            return Err(AwtError::InvalidConfig(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        if branching_factor < 2 {
            return Err(AwtError::InvalidConfig(format!(
                "branching factor must be at least 2, got {branching_factor}"
            )));
        }
        if dimensionality == 0 {
            return Err(AwtError::InvalidConfig(
                "dimensionality must be positive".into(),
            ));
        }
        Ok(Self {
            root: None,
            threshold,
            branching_factor,
            dimensionality,
            seen: HashSet::new(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn branching_factor(&self) -> usize {
        self.branching_factor
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn root(&self) -> Option<&CfNode> {
        self.root.as_ref()
    }

    pub fn point_count(&self) -> usize {
        self.seen.len()
    }

    /// Number of internal levels above the leaves.
    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut node = self.root.as_ref();
        while let Some(n) = node {
            if n.is_leaf() {
                break;
            }
            h += 1;
            node = n.children.first();
        }
        h
    }

    pub fn insert(&mut self, point_id: usize, v: &[f64]) -> Result<()> {
        if v.len() != self.dimensionality {
            return Err(AwtError::DimensionMismatch {
                expected: self.dimensionality,
                found: v.len(),
            });
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(AwtError::NonFinite(i));
        }
        if self.seen.contains(&point_id) {
            return Err(AwtError::DuplicatePoint(point_id));
        }

        match self.root.take() {
            None => {
                self.root = Some(CfNode::internal(vec![CfNode::leaf(point_id, v)])?);
            }
            Some(mut root) => {
                let sibling = self.insert_into(&mut root, point_id, v);
                let sibling = match sibling {
                    Ok(s) => s,
                    Err(e) => {
                        self.root = Some(root);
                        return Err(e);
                    }
                };
                self.root = Some(match sibling {
                    Some(s) => CfNode::internal(vec![root, s])?,
                    None => root,
                });
            }
        }
        self.seen.insert(point_id);
        Ok(())
    }

    /// Inserts below an internal node. Returns the second half if the node
    /// had to split.
    fn insert_into(&self, node: &mut CfNode, id: usize, v: &[f64]) -> Result<Option<CfNode>> {
        let point = ClusteringFeature::from_point(v);
        let idx = closest_child(&node.children, v);
        if node.children[idx].is_leaf() {
            let leaf = &mut node.children[idx];
            let tightness = leaf.cf.avg_intercluster_dist_sq(&point)?;
            if tightness <= self.threshold {
                leaf.cf.absorb(&point)?;
                leaf.member_ids.push(id);
            } else {
                node.children.insert(idx + 1, CfNode::leaf(id, v));
            }
        } else if let Some(sibling) = self.insert_into(&mut node.children[idx], id, v)? {
            node.children.insert(idx + 1, sibling);
        }
        node.cf.absorb(&point)?;

        if node.children.len() > self.branching_factor {
            let full = std::mem::replace(
                node,
                CfNode {
                    cf: point,
                    children: Vec::new(),
                    member_ids: Vec::new(),
                },
            );
            let (a, b) = full.split()?;
            *node = a;
            return Ok(Some(b));
        }
        Ok(None)
    }

    /// Leaves in left-to-right order.
    pub fn leaf_clusters(&self) -> Result<Vec<LeafCluster>> {
        let root = self.root.as_ref().ok_or(AwtError::EmptyTree)?;
        let mut leaves = Vec::new();
        root.collect_leaves(&mut leaves);
        Ok(leaves
            .into_iter()
            .map(|l| LeafCluster {
                cf: l.cf.clone(),
                member_ids: l.member_ids.clone(),
            })
            .collect())
    }

    pub fn leaf_count(&self) -> usize {
        let mut leaves = Vec::new();
        if let Some(r) = &self.root {
            r.collect_leaves(&mut leaves);
        }
        leaves.len()
    }

    /// Indented text rendering for inspection.
    pub fn dump_text(&self) -> String {
        let mut out = format!(
            "cftree threshold={} branching_factor={} dim={}\n",
            self.threshold, self.branching_factor, self.dimensionality
        );
        if let Some(r) = &self.root {
            r.write_text(0, &mut out);
        }
        out
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}
