//! Camera-to-world pose logs: one JSON object per line,
//! `{"frame_id": 12, "matrix": [16 numbers, row-major 4x4]}`.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::transform::{orthonormality_error, ROTATION_TOLERANCE};
use crate::model::Pose;

/// Rotations farther than this from orthonormal are rejected rather than repaired.
pub const REORTHONORMALIZE_LIMIT: f64 = 1e-4;

#[derive(Debug, Serialize, Deserialize)]
struct PoseRecord {
    frame_id: usize,
    matrix: Vec<f64>,
}

fn project_to_so3(r: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = r.svd(true, true);
    let rot = svd.u? * svd.v_t?;
    (rot.determinant() > 0.0).then_some(rot)
}

/// Converts a row-major 4×4 matrix into a pose, repairing small rotation drift.
pub fn pose_from_row_major(m: &[f64]) -> Result<Pose> {
    if m.len() != 16 {
        return Err(Error::Validation(format!("pose needs 16 numbers, got {}", m.len())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("pose has non-finite entries".into()));
    }
    let bottom = [m[12], m[13], m[14], m[15]];
    let expected = [0.0, 0.0, 0.0, 1.0];
    if bottom
        .iter()
        .zip(expected)
        .any(|(a, b)| (a - b).abs() > ROTATION_TOLERANCE)
    {
        return Err(Error::Validation(format!(
            "bottom row must be (0, 0, 0, 1), found {bottom:?}"
        )));
    }
    let mut rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
    let translation = Vector3::new(m[3], m[7], m[11]);
    let err = orthonormality_error(&rotation);
    if err >= REORTHONORMALIZE_LIMIT {
        return Err(Error::Validation(format!(
            "rotation block is not rigid (|RᵀR − I|∞ = {err:e})"
        )));
    }
    if err >= ROTATION_TOLERANCE {
        rotation = project_to_so3(&rotation)
            .ok_or_else(|| Error::Validation("rotation block is a reflection".into()))?;
    }
    Pose::new(rotation, translation)
}

pub fn pose_to_row_major(pose: &Pose) -> [f64; 16] {
    let m = pose.to_matrix();
    let mut out = [0.0; 16];
    for r in 0..4 {
        for c in 0..4 {
            out[r * 4 + c] = m[(r, c)];
        }
    }
    out
}

pub fn parse_poses(path: &Path, text: &str) -> Result<Vec<(usize, Pose)>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: PoseRecord = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        if !seen.insert(rec.frame_id) {
            return Err(Error::Consistency(format!(
                "{}: duplicate pose for frame {}",
                path.display(),
                rec.frame_id
            )));
        }
        let pose = pose_from_row_major(&rec.matrix).map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!(
                "{} line {}: {m}",
                path.display(),
                lineno + 1
            )),
            other => other,
        })?;
        out.push((rec.frame_id, pose));
    }
    Ok(out)
}

pub fn encode_poses(poses: &[(usize, Pose)]) -> String {
    let mut out = String::new();
    for (frame_id, pose) in poses {
        let rec = PoseRecord {
            frame_id: *frame_id,
            matrix: pose_to_row_major(pose).to_vec(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("pose record serializes"));
        out.push('\n');
    }
    out
}

pub fn load_poses(path: impl AsRef<Path>) -> Result<Vec<(usize, Pose)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poses(path, &text)
}

pub fn save_poses(poses: &[(usize, Pose)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(encode_poses(poses).as_bytes())
        .map_err(|e| Error::io(path, e))
}
