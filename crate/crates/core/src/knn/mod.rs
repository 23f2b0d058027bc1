//! Exact, tie-inclusive k-nearest-neighbor regression.
//!
//! The neighbor set of a query is every stored point inside the closed ball
//! whose radius is the k-th smallest distance, so more than `k` points are
//! averaged when several sit exactly at that radius. Estimates sum the
//! neighbor values in insertion order, which makes results reproducible
//! bit-for-bit against a plain linear scan.

mod kdtree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ContextPoint;
use kdtree::{sq_dist, KBest, KdTree};

/// Above this dimension the tree is skipped and every query scans linearly.
const MAX_TREE_DIM: usize = 16;
const MIN_TREE_POINTS: usize = 64;
const MIN_OVERFLOW: usize = 32;

/// `max(1, min(n, floor(n^(2/(2+dim)))))`, computed exactly.
pub fn default_k(n: usize, dim: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    let exponent = 2.0 / (2.0 + dim as f64);
    let mut k = (n as f64).powf(exponent).floor() as usize;
    // k <= n^(2/(2+dim))  <=>  k^(2+dim) <= n^2; fix any powf rounding.
    let fits = |k: usize| -> bool {
        let n2 = (n as u128) * (n as u128);
        match (k as u128).checked_pow(2 + dim as u32) {
            Some(p) => p <= n2,
            None => false,
        }
    };
    while k > 1 && !fits(k) {
        k -= 1;
    }
    while fits(k + 1) {
        k += 1;
    }
    k.clamp(1, n)
}

/// How many neighbors to use for a sample of a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KRule {
    /// `default_k(n, dim)`.
    Rate { dim: usize },
    /// A fixed k, clamped to the sample size.
    Fixed(usize),
}

impl KRule {
    pub fn k_for(&self, n: usize) -> usize {
        match *self {
            KRule::Rate { dim } => default_k(n, dim),
            KRule::Fixed(k) => k.clamp(1, n.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnEstimate {
    pub value: f64,
    /// r_k(x).
    pub radius: f64,
    /// |N_k(x)|; at least k.
    pub neighbor_count: usize,
}

/// Point store with an exact nearest-neighbor acceleration structure.
///
/// A kd-tree covers a prefix of the points; later insertions sit in an
/// overflow buffer that is scanned exactly. The tree is rebuilt once the
/// overflow reaches `rebuild_ratio` times the tree size (1.0: doubling).
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
    tree: Option<KdTree>,
    rebuild_ratio: f64,
}

impl SpatialIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            values: Vec::new(),
            tree: None,
            rebuild_ratio: 1.0,
        }
    }

    pub fn from_points(points: &[ContextPoint], values: &[f64]) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidValue(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points.first().map(|p| p.dim()).ok_or(Error::EmptyIndex)?;
        let mut idx = Self::new(dim);
        idx.coords.reserve(points.len() * dim);
        for (p, &v) in points.iter().zip(values) {
            p.check_dim(dim)?;
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!("non-finite value {v}")));
            }
            idx.coords.extend_from_slice(p.coords());
            idx.values.push(v);
        }
        idx.rebuild();
        Ok(idx)
    }

    /// Sets the overflow-to-tree size ratio that triggers a rebuild.
    pub fn with_rebuild_ratio(mut self, ratio: f64) -> Self {
        self.rebuild_ratio = ratio.max(0.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn push(&mut self, x: &[f64], value: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !value.is_finite() || x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidValue("non-finite point or value".into()));
        }
        self.coords.extend_from_slice(x);
        self.values.push(value);
        let built = self.built_len();
        let overflow = self.len() - built;
        if self.dim <= MAX_TREE_DIM
            && self.len() >= MIN_TREE_POINTS
            && overflow as f64 >= (MIN_OVERFLOW as f64).max(self.rebuild_ratio * built as f64)
        {
            self.rebuild();
        }
        Ok(())
    }

    fn built_len(&self) -> usize {
        self.tree.as_ref().map_or(0, |t| t.len())
    }

    fn rebuild(&mut self) {
        if self.dim <= MAX_TREE_DIM && self.len() >= MIN_TREE_POINTS {
            self.tree = Some(KdTree::build(&self.coords, self.dim, self.len()));
        }
    }

    fn check_query(&self, q: &[f64], k: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        if k == 0 || k > self.len() {
            return Err(Error::InsufficientData { k, n: self.len() });
        }
        Ok(())
    }

    /// Squared k-NN radius and the sorted ids of the closed-ball neighbors.
    fn query(&self, q: &[f64], k: usize) -> Result<(f64, Vec<usize>)> {
        self.check_query(q, k)?;
        let built = self.built_len();
        let mut best = KBest::new(k);
        let overflow: Vec<f64> = (built..self.len())
            .map(|i| sq_dist(q, self.point(i)))
            .collect();
        for &d in &overflow {
            best.offer(d);
        }
        if let Some(tree) = &self.tree {
            tree.k_best(q, &mut best);
        }
        debug_assert_eq!(best.len(), k);
        let r2 = best.worst();

        let mut ids = Vec::with_capacity(k + 4);
        if let Some(tree) = &self.tree {
            tree.within(q, r2, &mut ids);
        }
        ids.extend(
            overflow
                .iter()
                .enumerate()
                .filter(|(_, &d)| d <= r2)
                .map(|(j, _)| built + j),
        );
        ids.sort_unstable();
        Ok((r2, ids))
    }

    /// r_k(x): the smallest radius whose closed ball holds at least k points.
    pub fn knn_radius(&self, x: &[f64], k: usize) -> Result<f64> {
        self.check_query(x, k)?;
        let built = self.built_len();
        let mut best = KBest::new(k);
        for i in built..self.len() {
            best.offer(sq_dist(x, self.point(i)));
        }
        if let Some(tree) = &self.tree {
            tree.k_best(x, &mut best);
        }
        Ok(best.worst().sqrt())
    }

    /// Ids (ascending) of every point within Euclidean distance `r` of `x`.
    pub fn neighbors_within(&self, x: &[f64], r: f64) -> Result<Vec<usize>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let r2 = r * r;
        let built = self.built_len();
        let mut ids = Vec::new();
        if let Some(tree) = &self.tree {
            tree.within(x, r2, &mut ids);
        }
        ids.extend((built..self.len()).filter(|&i| sq_dist(x, self.point(i)) <= r2));
        ids.sort_unstable();
        Ok(ids)
    }

    /// Tie-inclusive k-NN mean at `x`.
    pub fn knn_regress(&self, x: &[f64], k: usize) -> Result<KnnEstimate> {
        let (r2, ids) = self.query(x, k)?;
        let sum = ids.iter().fold(0.0, |acc, &i| acc + self.values[i]);
        Ok(KnnEstimate {
            value: sum / ids.len() as f64,
            radius: r2.sqrt(),
            neighbor_count: ids.len(),
        })
    }

    /// Distance from `x` to the closest stored point.
    pub fn nearest_distance(&self, x: &[f64]) -> Result<f64> {
        self.knn_radius(x, 1)
    }
}
