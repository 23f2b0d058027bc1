use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

/// Squared Euclidean distance, accumulated coordinate by coordinate.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dist(pub f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Bounded max-heap keeping the `k` smallest squared distances seen.
pub(crate) struct KBest {
    k: usize,
    heap: BinaryHeap<Dist>,
}

impl KBest {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn worst(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |d| d.0)
        }
    }

    #[inline]
    pub fn offer(&mut self, d: f64) {
        if self.heap.len() < self.k {
            self.heap.push(Dist(d));
        } else if d < self.worst() {
            self.heap.pop();
            self.heap.push(Dist(d));
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: usize, end: usize },
    // Left child is the next node; `right` indexes the right child.
    Split { axis: usize, value: f64, right: usize },
}

/// Static kd-tree over a prefix of the index's points.
#[derive(Debug, Clone)]
pub(crate) struct KdTree {
    dim: usize,
    pts: Vec<f64>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds over the first `n` rows of the row-major `coords`.
    pub fn build(coords: &[f64], dim: usize, n: usize) -> Self {
        let mut ids: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        if n > 0 {
            build_rec(coords, dim, &mut ids, 0, n, &mut nodes);
        }
        let mut pts = Vec::with_capacity(n * dim);
        for &i in &ids {
            pts.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
        }
        Self {
            dim,
            pts,
            ids,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.pts[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn k_best(&self, q: &[f64], best: &mut KBest) {
        if !self.nodes.is_empty() {
            self.k_best_rec(0, q, best);
        }
    }

    fn k_best_rec(&self, node: usize, q: &[f64], best: &mut KBest) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    best.offer(sq_dist(q, self.point(slot)));
                }
            }
            Node::Split { axis, value, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (node + 1, right)
                } else {
                    (right, node + 1)
                };
                self.k_best_rec(near, q, best);
                // Ties are never pruned: a far point at exactly the current
                // worst distance may still be needed.
                if diff * diff <= best.worst() {
                    self.k_best_rec(far, q, best);
                }
            }
        }
    }

    /// Pushes the original ids of every point with squared distance <= `r2`.
    pub fn within(&self, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        if !self.nodes.is_empty() {
            self.within_rec(0, q, r2, out);
        }
    }

    fn within_rec(&self, node: usize, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    if sq_dist(q, self.point(slot)) <= r2 {
                        out.push(self.ids[slot]);
                    }
                }
            }
            Node::Split { axis, value, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (node + 1, right)
                } else {
                    (right, node + 1)
                };
                self.within_rec(near, q, r2, out);
                if diff * diff <= r2 {
                    self.within_rec(far, q, r2, out);
                }
            }
        }
    }
}

fn build_rec(
    coords: &[f64],
    dim: usize,
    ids: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let here = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return here;
    }
    let coord = |i: usize, a: usize| coords[i * dim + a];
    let (mut axis, mut spread) = (0, -1.0);
    for a in 0..dim {
        let (lo, hi) = ids[start..end]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(coord(i, a)), hi.max(coord(i, a)))
            });
        if hi - lo > spread {
            spread = hi - lo;
            axis = a;
        }
    }
    if spread <= 0.0 {
        // All points coincide.
        nodes.push(Node::Leaf { start, end });
        return here;
    }
    let mid = start + (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        coord(a, axis).total_cmp(&coord(b, axis))
    });
    let value = coord(ids[mid], axis);
    nodes.push(Node::Split {
        axis,
        value,
        right: 0,
    });
    build_rec(coords, dim, ids, start, mid, nodes);
    let right = build_rec(coords, dim, ids, mid, end, nodes);
    if let Node::Split { right: r, .. } = &mut nodes[here] {
        *r = right;
    }
    here
}
