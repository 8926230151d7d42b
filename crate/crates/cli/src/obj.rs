//! The Wavefront OBJ subset used for meshes: `v x y z` and `f i j k ...`
//! records with 1-based indices. Polygons are fan-triangulated; texture,
//! normal and material records are ignored.

use std::fmt::Write as _;
use std::path::Path;

use scoredenoise_core::mesh::TriangleMesh;
use scoredenoise_core::{Error as CoreError, Point3};

use crate::error::{FormatError, Result};
use crate::io::{read_text, write_atomic};

/// Vertices and triangles, with the source line of every triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjData {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub face_lines: Vec<usize>,
}

pub fn parse_obj(text: &str) -> Result<ObjData, FormatError> {
    let mut data = ObjData { vertices: Vec::new(), triangles: Vec::new(), face_lines: Vec::new() };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<&str> = parts.collect();
                // an optional fourth (w) component is allowed and ignored
                if !(3..=4).contains(&coords.len()) {
                    return Err(FormatError::new(
                        line_no,
                        format!("vertex needs 3 coordinates, found {}", coords.len()),
                    ));
                }
                let mut xyz = [0.0f64; 3];
                for (v, c) in xyz.iter_mut().zip(&coords) {
                    *v = c.parse().map_err(|_| FormatError::new(line_no, format!("`{c}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(FormatError::new(line_no, format!("`{c}` is not finite")));
                    }
                }
                data.vertices.push(Point3::from_array(xyz));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for token in parts {
                    let head = token.split('/').next().unwrap_or(token);
                    let v: usize =
                        head.parse().map_err(|_| FormatError::new(line_no, format!("bad face index `{token}`")))?;
                    if v == 0 {
                        return Err(FormatError::new(line_no, "face indices are 1-based"));
                    }
                    idx.push(v - 1);
                }
                if idx.len() < 3 {
                    return Err(FormatError::new(line_no, format!("face needs 3 vertices, found {}", idx.len())));
                }
                for k in 1..idx.len() - 1 {
                    data.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    data.face_lines.push(line_no);
                }
            }
            _ => {}
        }
    }
    Ok(data)
}

impl ObjData {
    /// Validates into a mesh; bad faces are reported with their line.
    pub fn into_mesh(self) -> Result<TriangleMesh, FormatError> {
        if self.triangles.is_empty() {
            return Err(FormatError::new(0, "no faces"));
        }
        let lines = self.face_lines;
        TriangleMesh::new(self.vertices, self.triangles).map_err(|e| match e {
            CoreError::VertexOutOfBounds { face, vertex, vertex_count } => FormatError::new(
                lines[face],
                format!("face references vertex {} but only {vertex_count} are defined", vertex + 1),
            ),
            CoreError::DegenerateTriangle { face } => {
                FormatError::new(lines[face], format!("degenerate face (triangle {face} has zero area)"))
            }
            other => FormatError::new(0, other.to_string()),
        })
    }
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = read_text(path)?;
    parse_obj(&text).and_then(ObjData::into_mesh).map_err(|e| e.in_file(path))
}

/// OBJ text with shortest round-trip coordinates.
pub fn format_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    write_atomic(path, format_obj(mesh).as_bytes())
}
