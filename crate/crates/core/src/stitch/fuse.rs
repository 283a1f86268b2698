use std::collections::HashSet;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::{is_valid_depth, BinaryMask, DepthFrame, PointCloud, Pose};
use crate::stitch::StitchResult;

/// Which pixels of a depth frame to lift.
#[derive(Debug, Clone, Copy, Default)]
pub enum PixelFilter<'a> {
    #[default]
    All,
    /// Only pixels set in the mask.
    Inside(&'a BinaryMask),
    /// Only pixels clear in the mask.
    Outside(&'a BinaryMask),
}

impl PixelFilter<'_> {
    fn mask(&self) -> Option<&BinaryMask> {
        match self {
            PixelFilter::All => None,
            PixelFilter::Inside(m) | PixelFilter::Outside(m) => Some(m),
        }
    }

    #[inline]
    fn keeps(&self, idx: usize) -> bool {
        match self {
            PixelFilter::All => true,
            PixelFilter::Inside(m) => m.bits()[idx],
            PixelFilter::Outside(m) => !m.bits()[idx],
        }
    }
}

/// Lifts every valid, kept pixel to a point `R·(K⁻¹(u, v, 1)·z) + t`, in
/// row-major pixel order.
pub fn back_project(depth: &DepthFrame, pose: &Pose, filter: PixelFilter<'_>) -> Result<PointCloud> {
    let k = depth.intrinsics();
    if let Some(m) = filter.mask() {
        if m.dims() != (k.width, k.height) {
            return Err(Error::Consistency(format!(
                "frame {}: mask is {}x{}, depth is {}x{}",
                depth.frame_id(),
                m.width(),
                m.height(),
                k.width,
                k.height
            )));
        }
    }
    let mut points = Vec::new();
    for (idx, &z) in depth.values().iter().enumerate() {
        if !is_valid_depth(z) || !filter.keeps(idx) {
            continue;
        }
        let (u, v) = (idx % k.width, idx / k.width);
        points.push(pose.transform_point(&k.unproject(u, v, z)));
    }
    Ok(PointCloud::from_raw(points, None))
}

fn voxel_key(p: &Vector3<f64>, size: f64) -> (i64, i64, i64) {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Keeps the first point in each `size`-sided voxel, preserving input order.
/// A size of zero returns the cloud unchanged.
pub fn voxel_subsample(cloud: &PointCloud, size: f64) -> Result<PointCloud> {
    if !(size.is_finite() && size >= 0.0) {
        return Err(Error::Config(format!("voxel size must be >= 0, got {size}")));
    }
    if size == 0.0 {
        return Ok(cloud.clone());
    }
    let mut seen = HashSet::with_capacity(cloud.len());
    let mut points = Vec::new();
    let mut ids = cloud.chunk_ids().map(|_| Vec::new());
    for (i, p) in cloud.points().iter().enumerate() {
        if seen.insert(voxel_key(p, size)) {
            points.push(*p);
            if let (Some(out), Some(src)) = (ids.as_mut(), cloud.chunk_ids()) {
                out.push(src[i]);
            }
        }
    }
    Ok(PointCloud::from_raw(points, ids))
}

/// Maps each chunk-local cloud into the global frame with its `S_c`,
/// concatenates in chunk order (points tagged with their chunk) and
/// voxel-subsamples the union.
pub fn fuse(chunk_clouds: &[PointCloud], result: &StitchResult, voxel: f64) -> Result<PointCloud> {
    if chunk_clouds.len() != result.transforms.len() {
        return Err(Error::Consistency(format!(
            "{} chunk clouds for {} stitched chunks",
            chunk_clouds.len(),
            result.transforms.len()
        )));
    }
    let total = chunk_clouds.iter().map(PointCloud::len).sum();
    let mut points = Vec::with_capacity(total);
    let mut ids = Vec::with_capacity(total);
    for (c, (cloud, s)) in chunk_clouds.iter().zip(&result.transforms).enumerate() {
        points.extend(cloud.points().iter().map(|p| s.apply(p)));
        ids.extend(std::iter::repeat_n(c as u32, cloud.len()));
    }
    voxel_subsample(&PointCloud::from_raw(points, Some(ids)), voxel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{axis_angle, Intrinsics, Sim3};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn k() -> Intrinsics {
        Intrinsics::new(40.0, 42.0, 15.5, 11.0, 32, 24).unwrap()
    }

    #[test]
    fn principal_point_at_unit_depth() {
        let mut d = vec![0.0; 32 * 24];
        d[11 * 32 + 16] = 1.0;
        let k = Intrinsics::new(40.0, 40.0, 16.0, 11.0, 32, 24).unwrap();
        let frame = DepthFrame::new(0, d, k).unwrap();
        let c = back_project(&frame, &Pose::identity(), PixelFilter::All).unwrap();
        assert_eq!(c.points(), &[Vector3::new(0.0, 0.0, 1.0)]);
    }

    #[test]
    fn doubling_depth_doubles_points() {
        let d: Vec<f64> = (0..32 * 24).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let a = back_project(&DepthFrame::new(0, d.clone(), k()).unwrap(), &Pose::identity(), PixelFilter::All).unwrap();
        let b = back_project(
            &DepthFrame::new(0, d.iter().map(|z| 2.0 * z).collect(), k()).unwrap(),
            &Pose::identity(),
            PixelFilter::All,
        )
        .unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!((2.0 * p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn filter_polarity_partitions_pixels() {
        let d = vec![2.0; 32 * 24];
        let frame = DepthFrame::new(0, d, k()).unwrap();
        let m = BinaryMask::from_fn(32, 24, |x, y| x < 10 && y < 5);
        let inside = back_project(&frame, &Pose::identity(), PixelFilter::Inside(&m)).unwrap();
        let outside = back_project(&frame, &Pose::identity(), PixelFilter::Outside(&m)).unwrap();
        assert_eq!(inside.len(), 50);
        assert_eq!(outside.len(), 32 * 24 - 50);
        let bad = BinaryMask::new(3, 3);
        assert!(back_project(&frame, &Pose::identity(), PixelFilter::Inside(&bad)).is_err());
    }

    fn result_with(transforms: Vec<Sim3>) -> StitchResult {
        StitchResult {
            transforms,
            global_poses: BTreeMap::new(),
            transitions: vec![],
            overlaps: vec![],
        }
    }

    #[test]
    fn fuse_examples() {
        let a = PointCloud::new(vec![Vector3::new(0.01, 0.02, 0.03)]).unwrap();
        let res = result_with(vec![Sim3::identity(), Sim3::identity()]);
        let plain = fuse(&[a.clone(), a.clone()], &res, 0.0).unwrap();
        assert_eq!(plain.len(), 2);
        assert_eq!(plain.chunk_ids(), Some(&[0u32, 1][..]));
        let dedup = fuse(&[a.clone(), a.clone()], &res, 0.1).unwrap();
        assert_eq!(dedup.len(), 1);
        assert_eq!(dedup.chunk_ids(), Some(&[0u32][..]));
        assert!(fuse(&[a], &res, 0.0).is_err());
        assert!(voxel_subsample(&plain, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn reprojection_recovers_pixels(
            seed in prop::collection::vec(0.5f64..10.0, 32 * 24),
            ax in prop::array::uniform3(-1.0f64..1.0),
            angle in -3.0f64..3.0,
            t in prop::array::uniform3(-5.0f64..5.0),
        ) {
            let pose = Pose::new(axis_angle(&Vector3::from(ax), angle), Vector3::from(t)).unwrap();
            let frame = DepthFrame::new(0, seed.clone(), k()).unwrap();
            let cloud = back_project(&frame, &pose, PixelFilter::All).unwrap();
            prop_assert_eq!(cloud.len(), 32 * 24);
            for (idx, p) in cloud.points().iter().enumerate() {
                let cam = pose.inverse_transform_point(p);
                let (u, v, z) = k().project(&cam).unwrap();
                prop_assert!((u - (idx % 32) as f64).abs() < 1e-6);
                prop_assert!((v - (idx / 32) as f64).abs() < 1e-6);
                prop_assert!((z - seed[idx]).abs() < 1e-6);
            }
        }

        #[test]
        fn voxel_output_has_one_point_per_voxel(
            pts in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 1..200),
            size in 0.05f64..2.0,
        ) {
            let cloud = PointCloud::new(pts.iter().map(|p| Vector3::from(*p)).collect()).unwrap();
            let sub = voxel_subsample(&cloud, size).unwrap();
            let keys: HashSet<_> = cloud.points().iter().map(|p| voxel_key(p, size)).collect();
            prop_assert_eq!(sub.len(), keys.len());
            for p in cloud.points() {
                prop_assert!(sub.points().iter().any(|q| voxel_key(q, size) == voxel_key(p, size)));
            }
        }
    }
}
