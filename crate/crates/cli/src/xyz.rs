//! Plain-text point lists.
//!
//! One point per line as three whitespace-separated reals; blank lines and
//! lines starting with `#` are skipped. Writers print every value with six
//! significant digits in the style of C's `%g`.

use std::fmt::Write as _;
use std::path::Path;

use scoredenoise_core::{Point3, PointCloud};

use crate::error::{CliError, FormatError, Result};
use crate::io::{read_text, write_atomic};

pub fn parse_xyz(text: &str) -> Result<Vec<Point3>, FormatError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(FormatError::new(i + 1, format!("expected 3 values, found {}", fields.len())));
        }
        let mut xyz = [0.0f64; 3];
        for (v, f) in xyz.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| FormatError::new(i + 1, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(FormatError::new(i + 1, format!("`{f}` is not finite")));
            }
        }
        points.push(Point3::from_array(xyz));
    }
    Ok(points)
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let points = parse_xyz(&read_text(path)?).map_err(|e| e.in_file(path))?;
    if points.is_empty() {
        return Err(CliError::Input(format!("{}: no points", path.display())));
    }
    Ok(PointCloud::new(points)?)
}

/// `%g` formatting with six significant digits.
pub fn format_g6(v: f64) -> String {
    const P: i32 = 6;
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    // the exponent after rounding to P digits decides the style
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        strip_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_zeros(mantissa), sign, exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows of reals, one line each, space separated.
pub fn format_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format_g6(*v));
        }
        out.push('\n');
    }
    out
}

pub fn format_xyz(points: &[Point3]) -> String {
    let mut out = String::with_capacity(points.len() * 32);
    for p in points {
        let _ = writeln!(out, "{} {} {}", format_g6(p.x), format_g6(p.y), format_g6(p.z));
    }
    out
}

pub fn write_xyz(path: &Path, points: &[Point3]) -> Result<()> {
    write_atomic(path, format_xyz(points).as_bytes())
}
