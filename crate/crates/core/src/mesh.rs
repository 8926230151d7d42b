//! Triangle meshes: validation, surface sampling and point-to-mesh distance.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::rng::RngSeed;
use crate::spatial::SpatialIndex;
use crate::{Error, NormalizationTransform, Point3, PointCloud, Result};

/// Relative tolerance below which a triangle counts as zero-area.
const DEGENERATE_TOL: f64 = 1e-12;
const BVH_LEAF: usize = 4;

#[derive(Debug, Clone)]
struct BvhNode {
    lo: Point3,
    hi: Point3,
    /// Leaf: `tris[start..end]`; inner: `start`/`end` are child node ids.
    start: usize,
    end: usize,
    leaf: bool,
}

/// A validated triangle mesh with a bounding-volume hierarchy for distance
/// queries. Immutable once built.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
    bvh: Vec<BvhNode>,
    bvh_tris: Vec<usize>,
    extent: f64,
}

fn is_degenerate(a: Point3, b: Point3, c: Point3) -> bool {
    let cross = (b - a).cross(c - a).norm();
    let longest = (b - a).norm_sq().max((c - a).norm_sq()).max((c - b).norm_sq());
    cross.is_nan() || cross <= DEGENERATE_TOL * longest
}

impl TriangleMesh {
    /// Validates indices and rejects zero-area faces.
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(index) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePoint { index });
        }
        if triangles.is_empty() {
            return Err(Error::invalid("mesh has no triangles"));
        }
        for (face, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::VertexOutOfBounds { face, vertex: v, vertex_count: vertices.len() });
                }
            }
            if is_degenerate(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) {
                return Err(Error::DegenerateTriangle { face });
            }
        }
        let mut mesh = TriangleMesh { vertices, triangles, bvh: Vec::new(), bvh_tris: Vec::new(), extent: 0.0 };
        mesh.build_bvh();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    #[inline]
    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                0.5 * (b - a).cross(c - a).norm()
            })
            .collect()
    }

    /// The same mesh with every vertex mapped through `transform`.
    pub fn transformed(&self, transform: &NormalizationTransform) -> Result<TriangleMesh> {
        TriangleMesh::new(self.vertices.iter().map(|&v| transform.apply(v)).collect(), self.triangles.clone())
    }

    fn build_bvh(&mut self) {
        self.bvh_tris = (0..self.triangles.len()).collect();
        let centroids: Vec<Point3> = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (a + b + c) / 3.0
            })
            .collect();
        let n = self.triangles.len();
        self.build_node(&centroids, 0, n);
        let root = &self.bvh[0];
        self.extent = (root.hi - root.lo).norm();
    }

    fn bounds(&self, tris: &[usize]) -> (Point3, Point3) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for &t in tris {
            for v in self.triangle(t) {
                lo = Point3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
                hi = Point3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
            }
        }
        (lo, hi)
    }

    fn build_node(&mut self, centroids: &[Point3], start: usize, end: usize) -> usize {
        let (lo, hi) = self.bounds(&self.bvh_tris[start..end]);
        let id = self.bvh.len();
        self.bvh.push(BvhNode { lo, hi, start, end, leaf: true });
        if end - start <= BVH_LEAF {
            return id;
        }
        let span = hi - lo;
        let axis = if span.x >= span.y && span.x >= span.z {
            0
        } else if span.y >= span.z {
            1
        } else {
            2
        };
        let mid = start + (end - start) / 2;
        self.bvh_tris[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a].axis(axis).total_cmp(&centroids[b].axis(axis)).then(a.cmp(&b))
        });
        let left = self.build_node(centroids, start, mid);
        let right = self.build_node(centroids, mid, end);
        let node = &mut self.bvh[id];
        node.leaf = false;
        node.start = left;
        node.end = right;
        id
    }
}

fn box_dist_sq(q: Point3, lo: Point3, hi: Point3) -> f64 {
    let d = |v: f64, l: f64, h: f64| {
        if v < l {
            l - v
        } else if v > h {
            v - h
        } else {
            0.0
        }
    };
    let dx = d(q.x, lo.x, hi.x);
    let dy = d(q.y, lo.y, hi.y);
    let dz = d(q.z, lo.z, hi.z);
    dx * dx + dy * dy + dz * dz
}

/// Squared distance from `p` to triangle `abc` (Voronoi-region walk). In the
/// face region the distance to the supporting plane is used directly, which
/// is exact for points on the face.
fn triangle_dist_sq(p: Point3, a: Point3, b: Point3, c: Point3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return p.dist_sq(a);
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return p.dist_sq(b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return p.dist_sq(a + ab * (d1 / (d1 - d3)));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return p.dist_sq(c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return p.dist_sq(a + ac * (d2 / (d2 - d6)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return p.dist_sq(b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))));
    }
    let n = ab.cross(ac);
    let h = n.dot(ap);
    h * h / n.norm_sq()
}

/// Exact squared distance from `q` to the closed triangle `abc`.
pub fn point_to_triangle_sq(q: Point3, a: Point3, b: Point3, c: Point3) -> Result<f64> {
    if is_degenerate(a, b, c) {
        return Err(Error::invalid("triangle is degenerate"));
    }
    Ok(triangle_dist_sq(q, a, b, c))
}

/// Squared distance from `q` to the nearest triangle of `mesh`.
///
/// Subtrees are pruned with a small absolute slack so the result is the
/// same value an exhaustive scan returns.
pub fn point_to_mesh_sq(q: Point3, mesh: &TriangleMesh) -> f64 {
    let slack = 1e-9 * (1.0 + mesh.extent + q.norm());
    let mut best = f64::INFINITY;
    let mut stack: Vec<usize> = vec![0];
    while let Some(id) = stack.pop() {
        let node = &mesh.bvh[id];
        if best.is_finite() {
            let bound = libm::sqrt(best) + slack;
            if box_dist_sq(q, node.lo, node.hi) > bound * bound {
                continue;
            }
        }
        if node.leaf {
            for &t in &mesh.bvh_tris[node.start..node.end] {
                let [a, b, c] = mesh.triangle(t);
                let d = triangle_dist_sq(q, a, b, c);
                if d < best {
                    best = d;
                }
            }
        } else {
            let (l, r) = (node.start, node.end);
            let dl = box_dist_sq(q, mesh.bvh[l].lo, mesh.bvh[l].hi);
            let dr = box_dist_sq(q, mesh.bvh[r].lo, mesh.bvh[r].hi);
            // nearer child is popped first
            if dl <= dr {
                stack.push(r);
                stack.push(l);
            } else {
                stack.push(l);
                stack.push(r);
            }
        }
    }
    best
}

/// Reference implementation of [`point_to_mesh_sq`] scanning every face.
pub fn point_to_mesh_sq_exhaustive(q: Point3, mesh: &TriangleMesh) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            triangle_dist_sq(q, a, b, c)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Faces drawn proportionally to area, barycentric-uniform inside.
    UniformArea,
    /// Uniform oversampling followed by greedy sample elimination.
    PoissonDisk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub target_count: usize,
    pub oversample_factor: f64,
    pub method: SamplingMethod,
}

impl SamplingConfig {
    pub fn new(target_count: usize, method: SamplingMethod) -> Self {
        SamplingConfig { target_count, oversample_factor: 4.0, method }
    }
}

fn sample_uniform<R: Rng>(mesh: &TriangleMesh, count: usize, rng: &mut R) -> Result<Vec<Point3>> {
    let areas = mesh.triangle_areas();
    let faces = WeightedIndex::new(&areas).map_err(|e| Error::invalid(alloc::format!("{e}")))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let [a, b, c] = mesh.triangle(faces.sample(rng));
        let mut u: f64 = rng.random();
        let mut v: f64 = rng.random();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        out.push(a + (b - a) * u + (c - a) * v);
    }
    Ok(out)
}

#[derive(PartialEq)]
struct HeapKey(f64, usize);

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Greedy sample elimination: repeatedly drops the point whose nearest
/// living neighbour is closest (lowest index on ties) until `target` remain.
fn eliminate(points: Vec<Point3>, target: usize) -> Result<Vec<Point3>> {
    let m = points.len();
    if target >= m {
        return Ok(points);
    }
    let index = SpatialIndex::from_points(&points)?;
    let initial_k = 16.min(m - 1);
    let mut lists: Vec<Vec<usize>> = Vec::with_capacity(m);
    for (i, &p) in points.iter().enumerate() {
        lists.push(index.knn_excluding(p, initial_k, i)?);
    }
    let mut cursor = vec![0usize; m];
    let mut alive = vec![true; m];
    let mut alive_count = m;
    let mut heap = BinaryHeap::with_capacity(m);
    for i in 0..m {
        heap.push(Reverse(HeapKey(points[i].dist_sq(points[lists[i][0]]), i)));
    }

    while alive_count > target {
        let Some(Reverse(HeapKey(d, i))) = heap.pop() else {
            break;
        };
        if !alive[i] {
            continue;
        }
        while cursor[i] < lists[i].len() && !alive[lists[i][cursor[i]]] {
            cursor[i] += 1;
        }
        if cursor[i] == lists[i].len() {
            // every cached neighbour is gone; widen the search over living points
            let mut k = (lists[i].len() * 2).min(m - 1);
            loop {
                let fresh: Vec<usize> =
                    index.knn_excluding(points[i], k, i)?.into_iter().filter(|&j| alive[j]).collect();
                if !fresh.is_empty() || k == m - 1 {
                    lists[i] = fresh;
                    break;
                }
                k = (k * 2).min(m - 1);
            }
            cursor[i] = 0;
        }
        let current = points[i].dist_sq(points[lists[i][cursor[i]]]);
        if current > d {
            heap.push(Reverse(HeapKey(current, i)));
            continue;
        }
        alive[i] = false;
        alive_count -= 1;
    }
    Ok(points.into_iter().zip(alive).filter_map(|(p, a)| a.then_some(p)).collect())
}

/// Samples a point cloud from the surface of `mesh`. Deterministic in
/// `(mesh, cfg, seed)`.
pub fn sample_surface(mesh: &TriangleMesh, cfg: &SamplingConfig, seed: RngSeed) -> Result<PointCloud> {
    if cfg.target_count == 0 {
        return Err(Error::invalid("target count must be at least 1"));
    }
    if !(cfg.oversample_factor >= 1.0 && cfg.oversample_factor.is_finite()) {
        return Err(Error::invalid("oversample factor must be >= 1"));
    }
    let mut rng = seed.stream(0);
    let points = match cfg.method {
        SamplingMethod::UniformArea => sample_uniform(mesh, cfg.target_count, &mut rng)?,
        SamplingMethod::PoissonDisk => {
            let m = libm::ceil(cfg.target_count as f64 * cfg.oversample_factor) as usize;
            let dense = sample_uniform(mesh, m.max(cfg.target_count), &mut rng)?;
            eliminate(dense, cfg.target_count)?
        }
    };
    PointCloud::new(points)
}

/// Simple closed meshes used for synthetic data.
pub mod primitives {
    use super::*;

    /// The unit square `[0,1]^2` in the `z = 0` plane, as two triangles.
    pub fn unit_square() -> TriangleMesh {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).expect("valid square")
    }

    /// Axis-aligned cube centered at the origin with the given half extent.
    pub fn cube(half: f64) -> TriangleMesh {
        let h = half;
        let v = vec![
            Point3::new(-h, -h, -h),
            Point3::new(h, -h, -h),
            Point3::new(h, h, -h),
            Point3::new(-h, h, -h),
            Point3::new(-h, -h, h),
            Point3::new(h, -h, h),
            Point3::new(h, h, h),
            Point3::new(-h, h, h),
        ];
        let t = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        TriangleMesh::new(v, t).expect("valid cube")
    }

    /// Latitude/longitude sphere of unit radius.
    pub fn uv_sphere(stacks: usize, slices: usize) -> TriangleMesh {
        let stacks = stacks.max(2);
        let slices = slices.max(3);
        let mut v = vec![Point3::new(0.0, 0.0, 1.0)];
        for i in 1..stacks {
            let theta = core::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let phi = 2.0 * core::f64::consts::PI * j as f64 / slices as f64;
                v.push(Point3::new(
                    libm::sin(theta) * libm::cos(phi),
                    libm::sin(theta) * libm::sin(phi),
                    libm::cos(theta),
                ));
            }
        }
        let south = v.len();
        v.push(Point3::new(0.0, 0.0, -1.0));
        let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
        let mut t = Vec::new();
        for j in 0..slices {
            t.push([0, ring(1, j), ring(1, j + 1)]);
            t.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                let (a, b) = (ring(i, j), ring(i, j + 1));
                let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
                t.push([a, c, d]);
                t.push([a, d, b]);
            }
        }
        TriangleMesh::new(v, t).expect("valid sphere")
    }

    /// Subdivided icosahedron of unit radius.
    pub fn icosphere(subdivisions: usize) -> TriangleMesh {
        let p = (1.0 + libm::sqrt(5.0)) / 2.0;
        let mut v: Vec<Point3> = [
            [-1.0, p, 0.0],
            [1.0, p, 0.0],
            [-1.0, -p, 0.0],
            [1.0, -p, 0.0],
            [0.0, -1.0, p],
            [0.0, 1.0, p],
            [0.0, -1.0, -p],
            [0.0, 1.0, -p],
            [p, 0.0, -1.0],
            [p, 0.0, 1.0],
            [-p, 0.0, -1.0],
            [-p, 0.0, 1.0],
        ]
        .iter()
        .map(|&a| {
            let q = Point3::from_array(a);
            q / q.norm()
        })
        .collect();
        let mut t: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoint = alloc::collections::BTreeMap::new();
            let mut mid = |a: usize, b: usize, v: &mut Vec<Point3>| -> usize {
                let key = (a.min(b), a.max(b));
                *midpoint.entry(key).or_insert_with(|| {
                    let m = (v[a] + v[b]) * 0.5;
                    v.push(m / m.norm());
                    v.len() - 1
                })
            };
            let mut next = Vec::with_capacity(t.len() * 4);
            for &[a, b, c] in &t {
                let ab = mid(a, b, &mut v);
                let bc = mid(b, c, &mut v);
                let ca = mid(c, a, &mut v);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            t = next;
        }
        TriangleMesh::new(v, t).expect("valid icosphere")
    }
}

#[cfg(test)]
mod tests {
    use super::primitives::*;
    use super::*;

    const A: Point3 = Point3::new(0.0, 0.0, 0.0);
    const B: Point3 = Point3::new(1.0, 0.0, 0.0);
    const C: Point3 = Point3::new(0.0, 1.0, 0.0);

    /// Squared distance to the triangle by dense barycentric enumeration.
    fn grid_oracle(q: Point3, a: Point3, b: Point3, c: Point3, n: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                let p = a + (b - a) * u + (c - a) * v;
                best = best.min(q.dist_sq(p));
            }
        }
        best
    }

    #[test]
    fn triangle_distance_examples() {
        assert_eq!(point_to_triangle_sq(Point3::new(0.25, 0.25, 0.5), A, B, C).unwrap(), 0.25);
        assert_eq!(point_to_triangle_sq(Point3::new(0.2, 0.3, 0.0), A, B, C).unwrap(), 0.0);
        let q = Point3::new(2.0, 0.0, 0.0);
        let d = point_to_triangle_sq(q, A, B, C).unwrap();
        assert_eq!(d, 1.0);
        assert!((grid_oracle(q, A, B, C, 200) - d).abs() < 1e-12);
    }

    #[test]
    fn triangle_distance_matches_grid_oracle_in_every_region() {
        let queries = [
            Point3::new(-1.0, -1.0, 0.3),
            Point3::new(2.0, -0.5, -0.2),
            Point3::new(-0.5, 2.0, 0.1),
            Point3::new(0.5, -1.0, 0.0),
            Point3::new(-1.0, 0.5, 1.0),
            Point3::new(1.0, 1.0, -0.4),
            Point3::new(0.1, 0.1, 2.0),
        ];
        for q in queries {
            let d = point_to_triangle_sq(q, A, B, C).unwrap();
            let oracle = grid_oracle(q, A, B, C, 400);
            // grid resolution bounds the oracle's overestimate
            assert!(d <= oracle + 1e-12 && oracle - d < 1e-4, "{q:?}: {d} vs {oracle}");
        }
    }

    #[test]
    fn triangle_distance_permutation_invariant() {
        let (a, b, c) = (Point3::new(0.1, 0.2, 0.3), Point3::new(1.3, -0.2, 0.5), Point3::new(0.4, 0.9, -0.7));
        let q = Point3::new(0.7, 0.8, 0.9);
        let base = point_to_triangle_sq(q, a, b, c).unwrap();
        for (x, y, z) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
            let d = point_to_triangle_sq(q, x, y, z).unwrap();
            assert!((d - base).abs() <= 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        assert!(point_to_triangle_sq(Point3::ZERO, A, B, B * 2.0).is_err());
        let err = TriangleMesh::new(vec![A, B, C], vec![[0, 1, 2], [0, 1, 1]]).unwrap_err();
        assert_eq!(err, Error::DegenerateTriangle { face: 1 });
    }

    #[test]
    fn out_of_bounds_rejected() {
        let err = TriangleMesh::new(vec![A, B, C], vec![[0, 1, 99]]).unwrap_err();
        assert_eq!(err, Error::VertexOutOfBounds { face: 0, vertex: 99, vertex_count: 3 });
    }

    #[test]
    fn cube_center_distance() {
        let cube = cube(0.5);
        assert_eq!(cube.vertices().len(), 8);
        assert_eq!(cube.triangles().len(), 12);
        assert_eq!(point_to_mesh_sq(Point3::ZERO, &cube), 0.25);
        assert_eq!(point_to_mesh_sq_exhaustive(Point3::ZERO, &cube), 0.25);
    }

    #[test]
    fn primitives_are_closed_and_unit() {
        let ico = icosphere(2);
        assert_eq!(ico.triangles().len(), 320);
        assert!(ico.vertices().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let uv = uv_sphere(8, 12);
        assert_eq!(uv.triangles().len(), 2 * 12 + 2 * 12 * 6);
        let total: f64 = cube(0.5).triangle_areas().iter().sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn square_samples_stay_on_support() {
        let sq = unit_square();
        for method in [SamplingMethod::UniformArea, SamplingMethod::PoissonDisk] {
            let c = sample_surface(&sq, &SamplingConfig::new(300, method), RngSeed(3)).unwrap();
            assert_eq!(c.len(), 300);
            for p in c.points() {
                assert!(p.z == 0.0 && (0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y));
            }
        }
    }

    #[test]
    fn zero_count_rejected() {
        let cfg = SamplingConfig::new(0, SamplingMethod::UniformArea);
        assert!(sample_surface(&unit_square(), &cfg, RngSeed(0)).is_err());
    }

    #[test]
    fn elimination_keeps_target_and_raises_spacing() {
        let sq = unit_square();
        let dense = sample_uniform(&sq, 400, &mut RngSeed(9).stream(0)).unwrap();
        let kept = eliminate(dense.clone(), 100).unwrap();
        assert_eq!(kept.len(), 100);
        let min_gap = |pts: &[Point3]| {
            let mut m = f64::INFINITY;
            for i in 0..pts.len() {
                for j in 0..i {
                    m = m.min(pts[i].dist_sq(pts[j]));
                }
            }
            m
        };
        assert!(min_gap(&kept) > min_gap(&dense));
    }
}
