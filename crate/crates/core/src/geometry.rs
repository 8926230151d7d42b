//! Points, point clouds and the unit-sphere normalization.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use crate::{Error, Result};

/// A point (or displacement vector) in 3-space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3::new(0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn axis(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    /// Squared Euclidean distance. Every nearest-neighbour routine in the
    /// crate compares values produced by this exact expression.
    #[inline]
    pub fn dist_sq(self, o: Point3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    #[inline]
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Point3 {
    #[inline]
    fn sub_assign(&mut self, o: Point3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// An ordered, non-empty set of finite points. Indices are stable and are
/// part of the cloud's identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePoint { index });
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let sum = self.points.iter().fold(Point3::ZERO, |acc, &p| acc + p);
        sum / self.points.len() as f64
    }

    /// The sub-cloud made of `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let p = self
                .points
                .get(i)
                .ok_or_else(|| Error::invalid(alloc::format!("index {i} out of bounds for {} points", self.len())))?;
            out.push(*p);
        }
        PointCloud::new(out)
    }

    pub fn translated(&self, t: Point3) -> PointCloud {
        PointCloud { points: self.points.iter().map(|&p| p + t).collect() }
    }

    pub fn concat(clouds: &[PointCloud]) -> Result<PointCloud> {
        PointCloud::new(clouds.iter().flat_map(|c| c.points.iter().copied()).collect())
    }
}

impl Index<usize> for PointCloud {
    type Output = Point3;
    fn index(&self, i: usize) -> &Point3 {
        &self.points[i]
    }
}

/// Maps a frame into the normalized one via `(p - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub center: Point3,
    pub scale: f64,
}

impl NormalizationTransform {
    pub const IDENTITY: NormalizationTransform = NormalizationTransform { center: Point3::ZERO, scale: 1.0 };

    pub fn new(center: Point3, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) || !center.is_finite() {
            return Err(Error::invalid("normalization scale must be positive and finite"));
        }
        Ok(NormalizationTransform { center, scale })
    }

    #[inline]
    pub fn apply(&self, p: Point3) -> Point3 {
        (p - self.center) / self.scale
    }

    #[inline]
    pub fn invert(&self, p: Point3) -> Point3 {
        p * self.scale + self.center
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud { points: cloud.points.iter().map(|&p| self.apply(p)).collect() }
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud { points: cloud.points.iter().map(|&p| self.invert(p)).collect() }
    }
}

/// Centers the cloud at its centroid and scales it so the farthest point
/// lies on the unit sphere. A cloud whose points all coincide keeps scale 1.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> (PointCloud, NormalizationTransform) {
    let center = cloud.centroid();
    let radius_sq = cloud.points.iter().map(|p| p.dist_sq(center)).fold(0.0_f64, f64::max);
    let radius = libm::sqrt(radius_sq);
    let scale = if radius > 0.0 { radius } else { 1.0 };
    let transform = NormalizationTransform { center, scale };
    (transform.apply_cloud(cloud), transform)
}
