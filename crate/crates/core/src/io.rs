//! Plain-text file formats.
//!
//! Point clouds and waypoint lists share one format: one `x y z` triple per
//! line, meters, with `#` comments and blank lines ignored. Trajectories are
//! written as time-stamped rows `t x y z vx vy vz`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::map::PointCloud;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn parse_points(path: &Path, text: &str) -> Result<Vec<Vector3<f64>>, IoError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(IoError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut coords = [0.0; 3];
        for (i, f) in fields.iter().enumerate() {
            coords[i] = f.parse::<f64>().map_err(|e| IoError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("bad number {f:?}: {e}"),
            })?;
            if !coords[i].is_finite() {
                return Err(IoError::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("non-finite coordinate {f:?}"),
                });
            }
        }
        points.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    Ok(points)
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<Vector3<f64>>, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_points(path, &text)
}

pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud, IoError> {
    Ok(PointCloud::new(read_points(path)?))
}

pub fn format_points(points: &[Vector3<f64>]) -> String {
    let mut out = String::new();
    for p in points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

pub fn write_points(path: impl AsRef<Path>, points: &[Vector3<f64>]) -> Result<(), IoError> {
    std::fs::write(path, format_points(points))?;
    Ok(())
}

/// One row per sample: `t x y z vx vy vz`.
pub fn format_trajectory_rows(rows: &[(f64, Vector3<f64>, Vector3<f64>)]) -> String {
    let mut out = String::new();
    for (t, p, v) in rows {
        let _ = writeln!(out, "{} {} {} {} {} {} {}", t, p.x, p.y, p.z, v.x, v.y, v.z);
    }
    out
}

pub fn write_trajectory_rows(
    path: impl AsRef<Path>,
    rows: &[(f64, Vector3<f64>, Vector3<f64>)],
) -> Result<(), IoError> {
    std::fs::write(path, format_trajectory_rows(rows))?;
    Ok(())
}
