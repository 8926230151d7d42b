//! Exact nearest-neighbour search.
//!
//! [`SpatialIndex`] is a k-d tree over a snapshot of 3D points. All queries
//! order results by `(squared distance, index)`, so they agree exactly with a
//! linear scan, ties included. Pruning only skips a subtree when its lower
//! bound is strictly greater than the current k-th distance.

use alloc::vec::Vec;

use crate::{Error, Point3, PointCloud, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Immutable k-d tree. Safe to share between threads for read-only queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Bounded, sorted candidate list keyed by `(dist_sq, index)`.
struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(k: usize) -> Self {
        Candidates { k, items: Vec::with_capacity(k + 1) }
    }

    #[inline]
    fn is_full(&self) -> bool {
        self.items.len() == self.k
    }

    #[inline]
    fn worst(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.0)
    }

    #[inline]
    fn offer(&mut self, d: f64, i: usize) {
        if self.is_full() {
            let (wd, wi) = self.items[self.k - 1];
            if d > wd || (d == wd && i > wi) {
                return;
            }
        }
        let pos = self.items.partition_point(|&(cd, ci)| cd < d || (cd == d && ci < i));
        self.items.insert(pos, (d, i));
        self.items.truncate(self.k);
    }
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::build(cloud.points().to_vec())
    }

    /// Builds from raw points. Fails on an empty or non-finite input.
    pub fn from_points(points: &[Point3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePoint { index });
        }
        Ok(Self::build(points.to_vec()))
    }

    fn build(points: Vec<Point3>) -> Self {
        let mut index = SpatialIndex { order: (0..points.len()).collect(), points, nodes: Vec::new() };
        let n = index.points.len();
        index.build_node(0, n);
        index
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            let p = self.points[i].to_array();
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a))).unwrap_or(0);
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a].axis(axis).total_cmp(&points[b].axis(axis)).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]].axis(axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// The `k` nearest point indices to `q`, nearest first, ties broken by
    /// ascending index.
    pub fn knn(&self, q: Point3, k: usize) -> Result<Vec<usize>> {
        Ok(self.knn_with_distances(q, k, None)?.into_iter().map(|(_, i)| i).collect())
    }

    /// Like [`knn`](Self::knn) but never returns `exclude`.
    pub fn knn_excluding(&self, q: Point3, k: usize, exclude: usize) -> Result<Vec<usize>> {
        Ok(self.knn_with_distances(q, k, Some(exclude))?.into_iter().map(|(_, i)| i).collect())
    }

    /// `(squared distance, index)` pairs for the `k` nearest points.
    pub fn knn_with_distances(&self, q: Point3, k: usize, exclude: Option<usize>) -> Result<Vec<(f64, usize)>> {
        let available = self.points.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        if k == 0 || k > available {
            return Err(Error::invalid(alloc::format!("k = {k} must be in 1..={available}")));
        }
        let mut cands = Candidates::new(k);
        self.search(0, q, exclude, &mut cands);
        Ok(cands.items)
    }

    /// Index of the nearest stored point (lowest index on ties).
    pub fn nearest(&self, q: Point3) -> usize {
        let mut cands = Candidates::new(1);
        self.search(0, q, None, &mut cands);
        cands.items[0].1
    }

    fn search(&self, node: usize, q: Point3, exclude: Option<usize>, cands: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) != exclude {
                        cands.offer(q.dist_sq(self.points[i]), i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q.axis(axis) - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, cands);
                if !cands.is_full() || diff * diff <= cands.worst() {
                    self.search(far, q, exclude, cands);
                }
            }
        }
    }
}

/// Neighbour lists (self excluded) for every point, `k` per point, flattened
/// row-major. Uses the k-d tree.
pub(crate) fn knn_graph_points(points: &[Point3], k: usize) -> Result<Vec<usize>> {
    let index = SpatialIndex::from_points(points)?;
    let mut out = Vec::with_capacity(points.len() * k);
    for (i, &p) in points.iter().enumerate() {
        out.extend(index.knn_excluding(p, k, i)?);
    }
    Ok(out)
}

/// Neighbour lists (self excluded) for `n` feature rows of width `dim`,
/// by exhaustive scan. Ordering matches [`SpatialIndex`].
pub(crate) fn knn_graph_rows(rows: &[f64], dim: usize, k: usize) -> Result<Vec<usize>> {
    let n = rows.len() / dim;
    if k == 0 || k >= n {
        return Err(Error::invalid(alloc::format!("graph k = {k} needs more than {k} points, got {n}")));
    }
    let mut out = Vec::with_capacity(n * k);
    let mut cands = Candidates::new(k);
    for i in 0..n {
        cands.items.clear();
        let a = &rows[i * dim..(i + 1) * dim];
        for j in 0..n {
            if j == i {
                continue;
            }
            let b = &rows[j * dim..(j + 1) * dim];
            let mut d = 0.0;
            for c in 0..dim {
                let t = a[c] - b[c];
                d += t * t;
            }
            cands.offer(d, j);
        }
        out.extend(cands.items.iter().map(|&(_, j)| j));
    }
    Ok(out)
}
