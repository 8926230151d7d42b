//! Reference score fields with known ground truth.
//!
//! [`EmpiricalConvolvedModel`] is the density of `y + n` with `y` uniform
//! over a finite support set and `n ~ N(0, sigma^2 I)`; its log-density and
//! score are exact. [`PlaneGaussianModel`] is the same construction for the
//! infinite plane `z = 0`, where the score has a closed form.

use alloc::vec::Vec;

use crate::denoise::{LocalScoreField, PatchView, ScoreModel};
use crate::{Error, Point3, PointCloud, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalConvolvedModel {
    support: Vec<Point3>,
    sigma: f64,
}

impl EmpiricalConvolvedModel {
    pub fn new(support: &PointCloud, sigma: f64) -> Result<Self> {
        Self::from_points(support.points().to_vec(), sigma)
    }

    fn from_points(support: Vec<Point3>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("oracle sigma must be positive"));
        }
        if support.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(EmpiricalConvolvedModel { support, sigma })
    }

    pub fn support(&self) -> &[Point3] {
        &self.support
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Scaled exponents `-|x - y_j|^2 / (2 sigma^2)` and their maximum.
    fn exponents(&self, x: Point3, out: &mut Vec<f64>) -> f64 {
        let inv = -0.5 / (self.sigma * self.sigma);
        out.clear();
        let mut max = f64::NEG_INFINITY;
        for &y in &self.support {
            let e = x.dist_sq(y) * inv;
            max = max.max(e);
            out.push(e);
        }
        max
    }

    /// `log sum_j exp(-|x - y_j|^2 / (2 sigma^2))`, without the normalizer.
    pub fn log_density(&self, x: Point3) -> f64 {
        let mut e = Vec::with_capacity(self.support.len());
        let max = self.exponents(x, &mut e);
        let sum: f64 = e.iter().map(|&v| libm::exp(v - max)).sum();
        max + libm::log(sum)
    }

    /// `sum_j w_j y_j - x` with softmax weights `w_j`: the score times
    /// `sigma^2`. Its length approximates the distance to the support.
    pub fn mean_shift(&self, x: Point3) -> Point3 {
        let mut e = Vec::with_capacity(self.support.len());
        let max = self.exponents(x, &mut e);
        let mut total = 0.0;
        let mut acc = Point3::ZERO;
        for (&y, &v) in self.support.iter().zip(&e) {
            let w = libm::exp(v - max);
            total += w;
            acc += (y - x) * w;
        }
        acc / total
    }

    /// Gradient of [`Self::log_density`].
    pub fn score(&self, x: Point3) -> Point3 {
        self.mean_shift(x) / (self.sigma * self.sigma)
    }
}

/// Uniform density on `z = 0` convolved with `N(0, sigma^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneGaussianModel {
    sigma: f64,
}

impl PlaneGaussianModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("oracle sigma must be positive"));
        }
        Ok(PlaneGaussianModel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `(0, 0, -z / sigma^2)`.
    pub fn score(&self, x: Point3) -> Point3 {
        Point3::new(0.0, 0.0, -x.z / (self.sigma * self.sigma))
    }

    /// `(0, 0, -z)`: the score rescaled so its length is the distance to
    /// the plane.
    pub fn normalized_score(&self, x: Point3) -> Point3 {
        Point3::new(0.0, 0.0, -x.z)
    }
}

/// Denoising with the empirical model's mean-shift field in place of the
/// network. The support and noise level are given in the frame of the cloud
/// being denoised and are carried into each patch's frame.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    model: EmpiricalConvolvedModel,
}

impl OracleDenoiser {
    pub fn new(model: EmpiricalConvolvedModel) -> Self {
        OracleDenoiser { model }
    }
}

/// The mean-shift field of an [`EmpiricalConvolvedModel`]; the same at
/// every anchor.
#[derive(Debug, Clone)]
pub struct MeanShiftField {
    model: EmpiricalConvolvedModel,
    anchors: usize,
}

impl LocalScoreField for MeanShiftField {
    fn anchor_count(&self) -> usize {
        self.anchors
    }

    fn localized_score(&mut self, _anchor: usize, x: Point3) -> Point3 {
        self.model.mean_shift(x)
    }

    fn ensemble_score(&mut self, x: Point3, _members: &[usize]) -> Point3 {
        self.model.mean_shift(x)
    }
}

impl ScoreModel for OracleDenoiser {
    type Field<'a> = MeanShiftField;

    fn min_patch_points(&self) -> usize {
        1
    }

    fn build_field(&self, patch: &PatchView<'_>) -> Result<MeanShiftField> {
        let t = patch.to_patch;
        let sigma = self.model.sigma / t.scale;
        // support points farther than this from every patch point carry
        // weights below exp(-72) relative to the nearest one
        let radius = patch.points.iter().map(|p| p.norm()).fold(0.0, f64::max) + 12.0 * sigma;
        let r2 = radius * radius;
        let mut support: Vec<Point3> =
            self.model.support.iter().map(|&y| t.apply(y)).filter(|y| y.norm_sq() <= r2).collect();
        if support.is_empty() {
            support = self.model.support.iter().map(|&y| t.apply(y)).collect();
        }
        Ok(MeanShiftField { model: EmpiricalConvolvedModel::from_points(support, sigma)?, anchors: patch.points.len() })
    }
}
