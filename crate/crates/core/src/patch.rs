//! Farthest point sampling and patch extraction.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::normalize_unit_sphere;
use crate::spatial::SpatialIndex;
use crate::{Error, NormalizationTransform, Point3, PointCloud, Result};

/// Incremental farthest point sampler. Each call to `next` returns the
/// unselected point whose distance to the selected set is largest, lowest
/// index first on ties.
struct FarthestPoints<'a> {
    points: &'a [Point3],
    min_dist: Vec<f64>,
    selected: Vec<bool>,
    count: usize,
}

impl<'a> FarthestPoints<'a> {
    fn new(points: &'a [Point3], start: usize) -> Self {
        let anchor = points[start];
        let mut selected = vec![false; points.len()];
        selected[start] = true;
        FarthestPoints { min_dist: points.iter().map(|p| p.dist_sq(anchor)).collect(), points, selected, count: 1 }
    }

    fn next(&mut self) -> Option<usize> {
        if self.count == self.points.len() {
            return None;
        }
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in self.min_dist.iter().enumerate() {
            if !self.selected[i] && d > best_d {
                best = i;
                best_d = d;
            }
        }
        self.selected[best] = true;
        self.count += 1;
        let p = self.points[best];
        for (d, q) in self.min_dist.iter_mut().zip(self.points) {
            let nd = q.dist_sq(p);
            if nd < *d {
                *d = nd;
            }
        }
        Some(best)
    }
}

/// Selects `m` indices by farthest point sampling, starting from `start`.
pub fn farthest_point_sample(cloud: &PointCloud, m: usize, start: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::invalid(alloc::format!("sample count {m} must be in 1..={n}")));
    }
    if start >= n {
        return Err(Error::invalid(alloc::format!("start index {start} out of bounds for {n} points")));
    }
    let mut fps = FarthestPoints::new(cloud.points(), start);
    let mut out = Vec::with_capacity(m);
    out.push(start);
    while out.len() < m {
        out.extend(fps.next());
    }
    Ok(out)
}

/// A kNN neighbourhood of a seed point, plus the transform that centers and
/// scales it to the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    /// Parent-cloud indices; the seed comes first, then its neighbours by
    /// ascending distance.
    pub indices: Vec<usize>,
    pub seed: usize,
    pub transform: NormalizationTransform,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The patch's points, in the parent cloud's frame.
    pub fn points(&self, cloud: &PointCloud) -> Vec<Point3> {
        self.indices.iter().map(|&i| cloud[i]).collect()
    }

    /// The patch's points in its own normalized frame.
    pub fn local_points(&self, cloud: &PointCloud) -> Vec<Point3> {
        self.indices.iter().map(|&i| self.transform.apply(cloud[i])).collect()
    }
}

/// Splits `cloud` into overlapping patches of `min(patch_size, N)` points.
///
/// `max(1, ceil(coverage * N / patch_size))` seeds are drawn by farthest
/// point sampling from index 0. If the patches leave any point uncovered,
/// further seeds are added until every index belongs to some patch.
pub fn extract_patches(cloud: &PointCloud, patch_size: usize, coverage: f64) -> Result<Vec<Patch>> {
    if patch_size == 0 {
        return Err(Error::invalid("patch size must be at least 1"));
    }
    if !(coverage > 0.0 && coverage.is_finite()) {
        return Err(Error::invalid("coverage ratio must be positive"));
    }
    let n = cloud.len();
    let k = patch_size.min(n);
    let wanted = libm::ceil(coverage * n as f64 / patch_size as f64) as usize;
    let wanted = wanted.clamp(1, n);

    let index = SpatialIndex::new(cloud);
    let mut fps = FarthestPoints::new(cloud.points(), 0);
    let mut covered = vec![false; n];
    let mut uncovered = n;
    let mut patches = Vec::with_capacity(wanted);
    let mut next_seed = Some(0);

    while let Some(seed) = next_seed {
        let mut indices = Vec::with_capacity(k);
        indices.push(seed);
        if k > 1 {
            indices.extend(index.knn_excluding(cloud[seed], k - 1, seed)?);
        }
        for &i in &indices {
            if !covered[i] {
                covered[i] = true;
                uncovered -= 1;
            }
        }
        let local = cloud.select(&indices)?;
        let (_, transform) = normalize_unit_sphere(&local);
        patches.push(Patch { indices, seed, transform });

        next_seed = if patches.len() < wanted || uncovered > 0 { fps.next() } else { None };
    }
    Ok(patches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> PointCloud {
        PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn fps_square_picks_diagonal() {
        // brute force: distances from corner 0 are 1, 2, 1 (squared) -> index 2
        assert_eq!(farthest_point_sample(&square(), 2, 0).unwrap(), vec![0, 2]);
    }

    #[test]
    fn fps_exhaustion_and_single() {
        let mut all = farthest_point_sample(&square(), 4, 1).unwrap();
        assert_eq!(all[0], 1);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert_eq!(farthest_point_sample(&square(), 1, 3).unwrap(), vec![3]);
        assert!(farthest_point_sample(&square(), 5, 0).is_err());
        assert!(farthest_point_sample(&square(), 0, 0).is_err());
    }

    #[test]
    fn fps_handles_duplicates() {
        let c = PointCloud::new(vec![Point3::ZERO; 5]).unwrap();
        let mut s = farthest_point_sample(&c, 5, 2).unwrap();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn single_patch_spans_cloud() {
        let pts = (0..1000)
            .map(|i| {
                let t = i as f64 * 0.01;
                Point3::new(libm::cos(t), libm::sin(t), t * 0.1)
            })
            .collect();
        let c = PointCloud::new(pts).unwrap();
        assert_eq!(extract_patches(&c, 1000, 3.0).unwrap().len(), 3);
        let patches = extract_patches(&c, 1000, 1.0).unwrap();
        assert_eq!(patches.len(), 1);
        let mut idx = patches[0].indices.clone();
        idx.sort();
        assert_eq!(idx, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn patch_seed_is_first_even_with_duplicates() {
        let c = PointCloud::new(vec![Point3::ZERO; 6]).unwrap();
        let patches = extract_patches(&c, 1, 1.0).unwrap();
        // patch size 1 forces one patch per point
        assert_eq!(patches.len(), 6);
        for p in &patches {
            assert_eq!(p.indices, vec![p.seed]);
        }
    }
}
