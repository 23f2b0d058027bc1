//! Region recovery: ε-graphs over contexts where an arm is estimated top,
//! their connected components, and Hausdorff comparison with ground truth.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::knn::SpatialIndex;
use crate::policy::Policy;
use crate::types::ContextPoint;

#[derive(Debug, Clone)]
struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidValue(format!("radius {r} must be positive and finite")));
    }
    Ok(())
}

/// Graph on points with an edge between every pair at distance `<= R`.
#[derive(Debug, Clone)]
pub struct EpsilonGraph {
    pub vertices: Vec<ContextPoint>,
    pub radius: f64,
    /// Sorted neighbor lists; symmetric, no self-loops.
    pub adjacency: Vec<Vec<usize>>,
}

impl EpsilonGraph {
    pub fn build(points: &[ContextPoint], radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let adjacency = if points.is_empty() {
            Vec::new()
        } else {
            let index = SpatialIndex::from_points(points, &vec![0.0; points.len()])?;
            points
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut nb = index.neighbors_within(p.coords(), radius)?;
                    nb.retain(|&j| j != i);
                    Ok(nb)
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            vertices: points.to_vec(),
            radius,
            adjacency,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Component label of every vertex, numbered in order of each
    /// component's smallest vertex index.
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.vertices.len();
        let mut uf = UnionFind::new(n);
        for (i, nb) in self.adjacency.iter().enumerate() {
            for &j in nb {
                uf.union(i, j);
            }
        }
        let mut label_of_root = vec![usize::MAX; n];
        let mut next = 0;
        (0..n)
            .map(|i| {
                let r = uf.find(i);
                if label_of_root[r] == usize::MAX {
                    label_of_root[r] = next;
                    next += 1;
                }
                label_of_root[r]
            })
            .collect()
    }
}

/// Recovered connected regions for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionEstimate {
    pub arm: usize,
    pub components: Vec<Vec<ContextPoint>>,
}

impl RegionEstimate {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Region dump with header `component_id,x1..xD`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self
            .components
            .iter()
            .flatten()
            .next()
            .map_or(0, |p| p.dim());
        let mut header = vec!["component_id".to_string()];
        header.extend((1..=dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (id, comp) in self.components.iter().enumerate() {
            for p in comp {
                let mut row = vec![id.to_string()];
                row.extend(p.coords().iter().map(|c| c.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Maximal subsets linked by chains of hops of length `<= R`.
pub fn connected_components(points: &[ContextPoint], radius: f64) -> Result<RegionEstimate> {
    let graph = EpsilonGraph::build(points, radius)?;
    let labels = graph.component_labels();
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut components = vec![Vec::new(); count];
    for (p, &l) in points.iter().zip(&labels) {
        components[l].push(p.clone());
    }
    Ok(RegionEstimate { arm: 0, components })
}

/// Contexts whose estimated top arm is `arm`.
pub fn select_top_vertices<P: Policy + ?Sized>(
    policy: &P,
    contexts: &[ContextPoint],
    arm: usize,
) -> Result<Vec<ContextPoint>> {
    let num_arms = policy.num_arms();
    if arm >= num_arms {
        return Err(Error::ArmOutOfRange { arm, num_arms });
    }
    let choices = policy.choose_all(contexts)?;
    Ok(contexts
        .iter()
        .zip(choices)
        .filter(|(_, c)| *c == arm)
        .map(|(x, _)| x.clone())
        .collect())
}

/// Select the estimated-top contexts for `arm` and split them into
/// components at radius `R`.
pub fn recover_regions<P: Policy + ?Sized>(
    policy: &P,
    contexts: &[ContextPoint],
    arm: usize,
    radius: f64,
) -> Result<RegionEstimate> {
    let vertices = select_top_vertices(policy, contexts, arm)?;
    let mut est = connected_components(&vertices, radius)?;
    est.arm = arm;
    Ok(est)
}

fn directed(from: &[ContextPoint], to: &SpatialIndex) -> Result<f64> {
    from.par_iter()
        .map(|p| to.nearest_distance(p.coords()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// `max(sup_a min_b |a-b|, sup_b min_a |a-b|)`.
pub fn hausdorff_distance(a: &[ContextPoint], b: &[ContextPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let ia = SpatialIndex::from_points(a, &vec![0.0; a.len()])?;
    let ib = SpatialIndex::from_points(b, &vec![0.0; b.len()])?;
    Ok(directed(a, &ib)?.max(directed(b, &ia)?))
}

/// Pairs `(recovered, truth)` chosen greedily by largest point overlap,
/// where `label` gives the true component of a point (if any).
pub fn match_components<F>(
    recovered: &[Vec<ContextPoint>],
    truth_count: usize,
    label: F,
) -> Vec<(usize, usize)>
where
    F: Fn(&ContextPoint) -> Option<usize>,
{
    let mut overlaps = Vec::new();
    for (q, comp) in recovered.iter().enumerate() {
        let mut counts = vec![0usize; truth_count];
        for p in comp {
            if let Some(l) = label(p).filter(|&l| l < truth_count) {
                counts[l] += 1;
            }
        }
        overlaps.extend(
            counts
                .into_iter()
                .enumerate()
                .filter(|&(_, c)| c > 0)
                .map(|(l, c)| (c, q, l)),
        );
    }
    overlaps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_q, mut used_l) = (vec![false; recovered.len()], vec![false; truth_count]);
    let mut pairs = Vec::new();
    for (_, q, l) in overlaps {
        if !used_q[q] && !used_l[l] {
            used_q[q] = true;
            used_l[l] = true;
            pairs.push((q, l));
        }
    }
    pairs.sort_unstable();
    pairs
}
