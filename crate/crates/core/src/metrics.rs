//! Chamfer and point-to-mesh distances.
//!
//! Both are means of squared distances. Reports multiply them by `10^4` and
//! print three decimals.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::mesh::{point_to_mesh_sq, TriangleMesh};
use crate::spatial::SpatialIndex;
use crate::{normalize_unit_sphere, Error, PointCloud, Result};

/// Factor applied to raw metrics in reports.
pub const REPORT_SCALE: f64 = 1e4;

fn one_sided(from: &PointCloud, to: &PointCloud, index: &SpatialIndex) -> f64 {
    let mut sum = 0.0;
    for &p in from.points() {
        sum += p.dist_sq(to[index.nearest(p)]);
    }
    sum / from.len() as f64
}

/// `mean_x min_y |x - y|^2 + mean_y min_x |x - y|^2`.
pub fn chamfer_distance(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ix = SpatialIndex::new(x);
    let iy = SpatialIndex::new(y);
    Ok(one_sided(x, y, &iy) + one_sided(y, x, &ix))
}

/// Mean squared distance from the points of `x` to the surface of `mesh`.
pub fn point_to_mesh(x: &PointCloud, mesh: &TriangleMesh) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if mesh.triangles().is_empty() {
        return Err(Error::invalid("mesh has no faces"));
    }
    let mut sum = 0.0;
    for &p in x.points() {
        sum += point_to_mesh_sq(p, mesh);
    }
    Ok(sum / x.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub shape: String,
    pub noise: String,
    pub resolution: String,
    pub cd_raw: f64,
    pub cd_scaled: f64,
    /// Absent when no reference mesh was given.
    pub p2m_raw: Option<f64>,
    pub p2m_scaled: Option<f64>,
}

impl EvalReport {
    pub fn new(cd_raw: f64, p2m_raw: Option<f64>) -> Self {
        EvalReport {
            cd_raw,
            cd_scaled: cd_raw * REPORT_SCALE,
            p2m_raw,
            p2m_scaled: p2m_raw.map(|v| v * REPORT_SCALE),
            ..EvalReport::default()
        }
    }

    pub fn with_labels(mut self, shape: &str, noise: &str, resolution: &str) -> Self {
        self.shape = shape.into();
        self.noise = noise.into();
        self.resolution = resolution.into();
        self
    }

    pub const CSV_HEADER: &'static str = "shape,noise,resolution,cd,p2m";

    /// One CSV line (no newline); P2M is empty when absent.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.shape,
            self.noise,
            self.resolution,
            format_metric(self.cd_scaled),
            self.p2m_scaled.map(format_metric).unwrap_or_default()
        )
    }
}

/// Fixed three-decimal rendering of a scaled metric.
pub fn format_metric(v: f64) -> String {
    format!("{v:.3}")
}

/// Aligned plain-text table of reports.
pub fn format_table(reports: &[EvalReport]) -> String {
    let header = ["shape", "noise", "resolution", "CD", "P2M"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.shape.clone(),
                r.noise.clone(),
                r.resolution.clone(),
                format_metric(r.cd_scaled),
                r.p2m_scaled.map(format_metric).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: [&str; 5]| {
        for (c, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            // text left, numbers right
            if c < 3 {
                out.push_str(&format!("{cell:<w$}"));
            } else {
                out.push_str(&format!("{cell:>w$}"));
            }
        }
        let trimmed = out.trim_end().len();
        out.truncate(trimmed);
        out.push('\n');
    };
    line(header);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3], &row[4]]);
    }
    out
}

/// Normalizes `denoised` to the unit sphere and scores it against `clean`
/// (and `mesh`), which must already be in that frame.
pub fn evaluate(denoised: &PointCloud, clean: &PointCloud, mesh: Option<&TriangleMesh>) -> Result<EvalReport> {
    let (normalized, _) = normalize_unit_sphere(denoised);
    let cd = chamfer_distance(&normalized, clean)?;
    let p2m = mesh.map(|m| point_to_mesh(&normalized, m)).transpose()?;
    Ok(EvalReport::new(cd, p2m))
}
