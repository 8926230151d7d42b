//! Perturbation models and point cloud corruption.
//!
//! Magnitudes are expressed in the unit-sphere frame, so `gaussian:0.02`
//! means a standard deviation of 2% of the bounding-sphere radius.
//!
//! Textual form (used by configuration files and the CLI):
//!
//! ```text
//! gaussian:SIGMA
//! anisotropic:SXX,SXY,SXZ,SYY,SYZ,SZZ      (covariance, upper triangle)
//! laplace:B                                (per-axis scale)
//! uniform:R                                (uniform in a ball of radius R)
//! discrete:X,Y,Z,P;X,Y,Z,P;...             (offsets with probabilities)
//! unidirectional:DX,DY,DZ,SIGMA            (direction is normalized on parse)
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::RngSeed;
use crate::{Error, Point3, PointCloud, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    IsotropicGaussian { sigma: f64 },
    AnisotropicGaussian { covariance: [[f64; 3]; 3] },
    Laplace { scale: f64 },
    UniformBall { radius: f64 },
    Discrete { offsets: Vec<Point3>, probabilities: Vec<f64> },
    Unidirectional { direction: Point3, sigma: f64 },
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// Lower-triangular factor of a symmetric positive semi-definite 3x3 matrix.
/// Zero pivots are allowed (rank-deficient covariances).
fn psd_factor(a: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() || (v - a[j][i]).abs() > tol {
                return Err(Error::invalid("covariance must be finite and symmetric"));
            }
        }
    }
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(Error::invalid("covariance is not positive semi-definite"));
        }
        if d <= tol {
            for i in j + 1..3 {
                let off = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if off.abs() > libm::sqrt(tol) * libm::sqrt(scale) {
                    return Err(Error::invalid("covariance is not positive semi-definite"));
                }
            }
            continue;
        }
        l[j][j] = libm::sqrt(d);
        for i in j + 1..3 {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / l[j][j];
        }
    }
    Ok(l)
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        NoiseModel::IsotropicGaussian { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::IsotropicGaussian { sigma } => nonneg("sigma", *sigma),
            NoiseModel::AnisotropicGaussian { covariance } => psd_factor(covariance).map(|_| ()),
            NoiseModel::Laplace { scale } => nonneg("laplace scale", *scale),
            NoiseModel::UniformBall { radius } => nonneg("ball radius", *radius),
            NoiseModel::Discrete { offsets, probabilities } => {
                if offsets.is_empty() || offsets.len() != probabilities.len() {
                    return Err(Error::invalid("discrete noise needs one probability per offset"));
                }
                if offsets.iter().any(|o| !o.is_finite()) {
                    return Err(Error::invalid("discrete offsets must be finite"));
                }
                for &p in probabilities {
                    nonneg("probability", p)?;
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(alloc::format!("probabilities sum to {total}, not 1")));
                }
                Ok(())
            }
            NoiseModel::Unidirectional { direction, sigma } => {
                nonneg("sigma", *sigma)?;
                if !direction.is_finite() || (direction.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid("unidirectional noise needs a unit direction"));
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn normal3<R: Rng>(rng: &mut R) -> Point3 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Point3::new(x, y, z)
}

fn laplace<R: Rng>(rng: &mut R, b: f64) -> f64 {
    // inverse CDF on u in (-1/2, 1/2)
    let u: f64 = rng.random::<f64>() - 0.5;
    let mag = -b * libm::log1p(-2.0 * u.abs());
    if u < 0.0 {
        -mag
    } else {
        mag
    }
}

/// `count` i.i.d. draws from `model`, deterministic in `seed`.
pub fn sample_noise(model: &NoiseModel, count: usize, seed: RngSeed) -> Result<Vec<Point3>> {
    model.validate()?;
    let mut rng = seed.stream(0);
    let mut out = Vec::with_capacity(count);
    match model {
        NoiseModel::IsotropicGaussian { sigma } => {
            for _ in 0..count {
                out.push(normal3(&mut rng) * *sigma);
            }
        }
        NoiseModel::AnisotropicGaussian { covariance } => {
            let l = psd_factor(covariance)?;
            for _ in 0..count {
                let z = normal3(&mut rng).to_array();
                let mut v = [0.0; 3];
                for (i, row) in l.iter().enumerate() {
                    v[i] = row[0] * z[0] + row[1] * z[1] + row[2] * z[2];
                }
                out.push(Point3::from_array(v));
            }
        }
        NoiseModel::Laplace { scale } => {
            for _ in 0..count {
                let x = laplace(&mut rng, *scale);
                let y = laplace(&mut rng, *scale);
                let z = laplace(&mut rng, *scale);
                out.push(Point3::new(x, y, z));
            }
        }
        NoiseModel::UniformBall { radius } => {
            for _ in 0..count {
                let p = loop {
                    let p = Point3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    if p.norm_sq() <= 1.0 {
                        break p;
                    }
                };
                out.push(p * *radius);
            }
        }
        NoiseModel::Discrete { offsets, probabilities } => {
            let pick = WeightedIndex::new(probabilities).map_err(|e| Error::invalid(alloc::format!("{e}")))?;
            for _ in 0..count {
                out.push(offsets[pick.sample(&mut rng)]);
            }
        }
        NoiseModel::Unidirectional { direction, sigma } => {
            for _ in 0..count {
                let g: f64 = rng.sample(StandardNormal);
                out.push(*direction * (g * *sigma));
            }
        }
    }
    Ok(out)
}

/// `x_i = y_i + n_i`, with `n_i` the i-th draw of [`sample_noise`].
pub fn perturb(cloud: &PointCloud, model: &NoiseModel, seed: RngSeed) -> Result<PointCloud> {
    let noise = sample_noise(model, cloud.len(), seed)?;
    PointCloud::new(cloud.points().iter().zip(noise).map(|(&p, n)| p + n).collect())
}

fn parse_list(s: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<core::result::Result<_, _>>()
        .map_err(|_| Error::invalid(alloc::format!("cannot parse numbers in `{s}`")))?;
    if vals.len() != expected {
        return Err(Error::invalid(alloc::format!("expected {expected} values in `{s}`, got {}", vals.len())));
    }
    Ok(vals)
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::invalid(alloc::format!("noise spec `{s}` must look like kind:params")))?;
        let model = match kind.trim() {
            "gaussian" => NoiseModel::IsotropicGaussian { sigma: parse_list(args, 1)?[0] },
            "laplace" => NoiseModel::Laplace { scale: parse_list(args, 1)?[0] },
            "uniform" => NoiseModel::UniformBall { radius: parse_list(args, 1)?[0] },
            "anisotropic" => {
                let v = parse_list(args, 6)?;
                NoiseModel::AnisotropicGaussian {
                    covariance: [[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]],
                }
            }
            "discrete" => {
                let mut offsets = Vec::new();
                let mut probabilities = Vec::new();
                for item in args.split(';') {
                    let v = parse_list(item, 4)?;
                    offsets.push(Point3::new(v[0], v[1], v[2]));
                    probabilities.push(v[3]);
                }
                NoiseModel::Discrete { offsets, probabilities }
            }
            "unidirectional" => {
                let v = parse_list(args, 4)?;
                let d = Point3::new(v[0], v[1], v[2]);
                let n = d.norm();
                if n.is_nan() || n == 0.0 {
                    return Err(Error::invalid("unidirectional direction must be non-zero"));
                }
                NoiseModel::Unidirectional { direction: d / n, sigma: v[3] }
            }
            other => return Err(Error::invalid(alloc::format!("unknown noise kind `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::IsotropicGaussian { sigma } => write!(f, "gaussian:{sigma}"),
            NoiseModel::Laplace { scale } => write!(f, "laplace:{scale}"),
            NoiseModel::UniformBall { radius } => write!(f, "uniform:{radius}"),
            NoiseModel::AnisotropicGaussian { covariance: c } => {
                write!(f, "anisotropic:{},{},{},{},{},{}", c[0][0], c[0][1], c[0][2], c[1][1], c[1][2], c[2][2])
            }
            NoiseModel::Discrete { offsets, probabilities } => {
                let items: Vec<String> = offsets
                    .iter()
                    .zip(probabilities)
                    .map(|(o, p)| alloc::format!("{},{},{},{}", o.x, o.y, o.z, p))
                    .collect();
                write!(f, "discrete:{}", items.join(";"))
            }
            NoiseModel::Unidirectional { direction: d, sigma } => {
                write!(f, "unidirectional:{},{},{},{}", d.x, d.y, d.z, sigma)
            }
        }
    }
}

impl NoiseModel {
    pub fn label(&self) -> String {
        self.to_string()
    }
}
