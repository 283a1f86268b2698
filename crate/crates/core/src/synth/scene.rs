use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Pose;

/// Infinite plane `n · p = offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SceneKind {
    /// Axis-aligned room `[-x, x] × [-y, y] × [-z, z]`, seen from inside.
    BoxRoom { half_extents: [f64; 3] },
    PlaneSet { planes: Vec<Plane> },
}

impl Default for SceneKind {
    fn default() -> Self {
        SceneKind::BoxRoom {
            half_extents: [4.0, 2.5, 4.0],
        }
    }
}

impl SceneKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            SceneKind::BoxRoom { half_extents } => {
                if half_extents.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(Error::Config("box room half extents must be positive".into()));
                }
            }
            SceneKind::PlaneSet { planes } => {
                if planes.is_empty() {
                    return Err(Error::Config("plane set is empty".into()));
                }
                for p in planes {
                    let n = Vector3::from(p.normal);
                    if !(n.norm() > 0.0 && p.offset.is_finite()) {
                        return Err(Error::Config("plane normals must be non-zero".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Smallest `t > 0` with `o + t·d` on a surface.
    pub fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t > 0.0 && t.is_finite() && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        match self {
            SceneKind::BoxRoom { half_extents } => {
                for axis in 0..3 {
                    if d[axis] != 0.0 {
                        let wall = half_extents[axis] * d[axis].signum();
                        consider((wall - o[axis]) / d[axis]);
                    }
                }
            }
            SceneKind::PlaneSet { planes } => {
                for p in planes {
                    let n = Vector3::from(p.normal);
                    let nd = n.dot(d);
                    if nd != 0.0 {
                        consider((p.offset - n.dot(o)) / nd);
                    }
                }
            }
        }
        best
    }
}

/// Nearest positive `t` with `‖o + t·d − c‖ = r`.
pub fn intersect_sphere(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let a = d.norm_squared();
    let b = oc.dot(d);
    let cc = oc.norm_squared() - r * r;
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    [(-b - sq) / a, (-b + sq) / a]
        .into_iter()
        .find(|t| *t > 0.0)
}

/// Camera-to-world pose at `eye` looking at `target`. Camera axes: x right,
/// y down, z forward; `up` is the world up direction.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> Result<Pose> {
    let f = (target - eye)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::Config("camera target coincides with its position".into()))?;
    let r = f
        .cross(up)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::Config("view direction is parallel to the up vector".into()))?;
    let d = f.cross(&r);
    Pose::new(Matrix3::from_columns(&[r, d, f]), *eye)
}
