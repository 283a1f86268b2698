use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_valid_depth, BinaryMask, DepthFrame, Pose};
use crate::prior::morphology::dilate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiSurfaceParams {
    /// Visibility slack and layer separation, in scene units.
    pub eps_vis: f64,
    /// Dilation of the dynamic region before taking its complement.
    pub dilate_radius: usize,
    /// Minimum visible hits for a pixel to count.
    pub min_count: usize,
}

impl Default for MultiSurfaceParams {
    fn default() -> Self {
        Self {
            eps_vis: 0.05,
            dilate_radius: 3,
            min_count: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSurfaceCounts {
    /// Eligible pixels with at least two depth layers.
    pub multi: usize,
    /// Pixels with at least `min_count` visible hits.
    pub eligible: usize,
}

impl MultiSurfaceCounts {
    pub fn ratio(&self) -> Option<f64> {
        (self.eligible > 0).then(|| self.multi as f64 / self.eligible as f64)
    }
}

/// Number of clusters in `depths` when consecutive sorted values more than
/// `gap` apart start a new cluster.
pub fn depth_layers(depths: &mut [f64], gap: f64) -> usize {
    if depths.is_empty() {
        return 0;
    }
    depths.sort_by(f64::total_cmp);
    1 + depths.windows(2).filter(|w| w[1] - w[0] > gap).count()
}

/// Multi-surface counts for one frame. Only pixels outside the dilated
/// dynamic region with valid depth are considered; a point counts at its
/// pixel when `z_proj <= z_depth + eps_vis`.
pub fn frame_multi_surface(
    points: &[Vector3<f64>],
    pose: &Pose,
    depth: &DepthFrame,
    dynamic: &BinaryMask,
    params: &MultiSurfaceParams,
) -> Result<MultiSurfaceCounts> {
    let k = depth.intrinsics();
    if dynamic.dims() != (k.width, k.height) {
        return Err(Error::Consistency(format!(
            "frame {}: evaluation mask is {}x{}, depth is {}x{}",
            depth.frame_id(),
            dynamic.width(),
            dynamic.height(),
            k.width,
            k.height
        )));
    }
    let excluded = dilate(dynamic, params.dilate_radius);
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); k.pixel_count()];
    for p in points {
        let Some((u, v, z)) = k.project_to_pixel(&pose.inverse_transform_point(p)) else {
            continue;
        };
        let idx = v * k.width + u;
        let zd = depth.values()[idx];
        if excluded.bits()[idx] || !is_valid_depth(zd) || z > zd + params.eps_vis {
            continue;
        }
        hits[idx].push(z);
    }
    let mut counts = MultiSurfaceCounts::default();
    for h in hits.iter_mut().filter(|h| !h.is_empty() && h.len() >= params.min_count) {
        counts.eligible += 1;
        if depth_layers(h, params.eps_vis) >= 2 {
            counts.multi += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Intrinsics;

    fn wall(z: f64, k: &Intrinsics, step: usize) -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        for v in 0..k.height {
            for u in 0..k.width {
                for _ in 0..step {
                    pts.push(k.unproject(u, v, z));
                }
            }
        }
        pts
    }

    #[test]
    fn layer_clustering() {
        assert_eq!(depth_layers(&mut [], 0.05), 0);
        assert_eq!(depth_layers(&mut [1.0, 1.01, 1.02, 1.04], 0.05), 1);
        assert_eq!(depth_layers(&mut [2.0, 1.0, 1.03], 0.05), 2);
    }

    #[test]
    fn single_surface_is_zero() {
        let k = Intrinsics::new(10.0, 10.0, 5.0, 4.0, 10, 8).unwrap();
        let d = DepthFrame::new(0, vec![2.0; 80], k).unwrap();
        let c = frame_multi_surface(&wall(2.0, &k, 2), &Pose::identity(), &d, &BinaryMask::new(10, 8), &Default::default()).unwrap();
        assert_eq!(c.eligible, 80);
        assert_eq!(c.ratio(), Some(0.0));
    }

    #[test]
    fn duplicated_wall_is_one() {
        let k = Intrinsics::new(10.0, 10.0, 5.0, 4.0, 10, 8).unwrap();
        let d = DepthFrame::new(0, vec![3.0; 80], k).unwrap();
        let mut pts = wall(3.0, &k, 1);
        pts.extend(wall(2.8, &k, 1));
        let c = frame_multi_surface(&pts, &Pose::identity(), &d, &BinaryMask::new(10, 8), &Default::default()).unwrap();
        assert_eq!(c.ratio(), Some(1.0));
    }

    #[test]
    fn gate_and_conditioning() {
        let k = Intrinsics::new(10.0, 10.0, 5.0, 4.0, 10, 8).unwrap();
        let d = DepthFrame::new(0, vec![2.0; 80], k).unwrap();
        let mut pts = wall(2.0, &k, 1);
        // behind the visible surface by more than the slack
        pts.extend(wall(2.5, &k, 1));
        let c = frame_multi_surface(&pts, &Pose::identity(), &d, &BinaryMask::new(10, 8), &Default::default()).unwrap();
        assert_eq!(c.eligible, 0);
        assert_eq!(c.ratio(), None);

        let mut m = BinaryMask::new(10, 8);
        m.set(0, 0, true);
        let c = frame_multi_surface(&wall(2.0, &k, 2), &Pose::identity(), &d, &m, &Default::default()).unwrap();
        assert_eq!(c.eligible, 80 - 16);
    }
}
