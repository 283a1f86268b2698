use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics together with the raster size they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Validation(format!(
                "focal lengths must be positive and finite (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("raster size must be non-zero".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::Validation(format!(
                "principal point ({}, {}) outside {}x{} raster",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Camera-frame point seen at pixel `(u, v)` with depth `z`.
    /// Pixel centers sit at integer coordinates.
    #[inline]
    pub fn unproject(&self, u: usize, v: usize, z: f64) -> Vector3<f64> {
        Vector3::new(
            (u as f64 - self.cx) / self.fx * z,
            (v as f64 - self.cy) / self.fy * z,
            z,
        )
    }

    /// Continuous image coordinates of a camera-frame point, `None` behind the camera.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        if !(p.z > 0.0) {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
            p.z,
        ))
    }

    /// Pixel hit by a camera-frame point: continuous coordinates rounded to the
    /// nearest integer pixel center. `None` behind the camera or outside the raster.
    #[inline]
    pub fn project_to_pixel(&self, p: &Vector3<f64>) -> Option<(usize, usize, f64)> {
        let (u, v, z) = self.project(p)?;
        let (u, v) = (u.round(), v.round());
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some((u as usize, v as usize, z))
        } else {
            None
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Depth is valid when it is finite and strictly positive. Zero, negative and
/// non-finite samples all mark missing depth.
#[inline]
pub fn is_valid_depth(z: f64) -> bool {
    z.is_finite() && z > 0.0
}

/// Per-frame depth raster, row-major top-down, with its intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    frame_id: usize,
    depth: Vec<f64>,
    intrinsics: Intrinsics,
}

impl DepthFrame {
    pub fn new(frame_id: usize, depth: Vec<f64>, intrinsics: Intrinsics) -> Result<Self> {
        intrinsics.validate()?;
        if depth.len() != intrinsics.pixel_count() {
            return Err(Error::Consistency(format!(
                "depth raster of frame {frame_id} has {} values, intrinsics expect {}x{}",
                depth.len(),
                intrinsics.width,
                intrinsics.height
            )));
        }
        Ok(Self {
            frame_id,
            depth,
            intrinsics,
        })
    }

    pub fn frame_id(&self) -> usize {
        self.frame_id
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn values(&self) -> &[f64] {
        &self.depth
    }

    pub fn into_values(self) -> Vec<f64> {
        self.depth
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.depth[v * self.intrinsics.width + u]
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|z| is_valid_depth(**z)).count()
    }
}
