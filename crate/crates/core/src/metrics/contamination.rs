use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BinaryMask, Intrinsics, Pose};

/// Guard added to the hit counts in the overdraw ratio.
pub const OVERDRAW_EPS: f64 = 1e-8;

/// Projection counts for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionCounts {
    /// Points landing in the dynamic region.
    pub n_dyn: usize,
    /// Dynamic pixels hit by at least one point.
    pub h_dyn: usize,
    pub n_static: usize,
    pub h_static: usize,
    /// `|Ω_dyn|`.
    pub area_dyn: usize,
    /// `|Ω_static|`.
    pub area_static: usize,
}

/// Projects `points` (in the pose's world frame) into the camera and counts
/// hits inside and outside `dynamic`. Points behind the camera or off the
/// raster are ignored.
pub fn projection_counts(
    points: &[Vector3<f64>],
    pose: &Pose,
    intrinsics: &Intrinsics,
    dynamic: &BinaryMask,
) -> Result<ProjectionCounts> {
    if dynamic.dims() != (intrinsics.width, intrinsics.height) {
        return Err(Error::Consistency(format!(
            "evaluation mask is {}x{}, frame is {}x{}",
            dynamic.width(),
            dynamic.height(),
            intrinsics.width,
            intrinsics.height
        )));
    }
    let mut hit = vec![false; intrinsics.pixel_count()];
    let mut counts = ProjectionCounts {
        area_dyn: dynamic.count(),
        ..Default::default()
    };
    counts.area_static = intrinsics.pixel_count() - counts.area_dyn;
    for p in points {
        let cam = pose.inverse_transform_point(p);
        let Some((u, v, _)) = intrinsics.project_to_pixel(&cam) else {
            continue;
        };
        let idx = v * intrinsics.width + u;
        let is_dyn = dynamic.bits()[idx];
        if is_dyn {
            counts.n_dyn += 1;
        } else {
            counts.n_static += 1;
        }
        if !hit[idx] {
            hit[idx] = true;
            if is_dyn {
                counts.h_dyn += 1;
            } else {
                counts.h_static += 1;
            }
        }
    }
    Ok(counts)
}

/// Dyn/static ratios of per-frame expectations. A frame enters the dynamic
/// (static) expectation only if its dynamic (static) region is non-empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContaminationRatios {
    pub c_den: Option<f64>,
    pub c_occ: Option<f64>,
    pub c_od: Option<f64>,
    /// Frames contributing to the dynamic expectations.
    pub frames_dyn: usize,
    pub frames_static: usize,
    /// Frames left out of the dynamic expectations for an empty region.
    pub frames_excluded: usize,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    let r = num / den;
    (den > 0.0 && r.is_finite()).then_some(r)
}

pub fn contamination_ratios(frames: &[ProjectionCounts]) -> ContaminationRatios {
    let (mut den_d, mut occ_d, mut od_d, mut nd) = (0.0, 0.0, 0.0, 0usize);
    let (mut den_s, mut occ_s, mut od_s, mut ns) = (0.0, 0.0, 0.0, 0usize);
    for c in frames {
        if c.area_dyn > 0 {
            den_d += c.n_dyn as f64 / c.area_dyn as f64;
            occ_d += c.h_dyn as f64 / c.area_dyn as f64;
            od_d += c.n_dyn as f64 / (c.h_dyn as f64 + OVERDRAW_EPS);
            nd += 1;
        }
        if c.area_static > 0 {
            den_s += c.n_static as f64 / c.area_static as f64;
            occ_s += c.h_static as f64 / c.area_static as f64;
            od_s += c.n_static as f64 / (c.h_static as f64 + OVERDRAW_EPS);
            ns += 1;
        }
    }
    let mut out = ContaminationRatios {
        frames_dyn: nd,
        frames_static: ns,
        frames_excluded: frames.len() - nd,
        ..Default::default()
    };
    if nd > 0 && ns > 0 {
        let (nd, ns) = (nd as f64, ns as f64);
        out.c_den = ratio(den_d / nd, den_s / ns);
        out.c_occ = ratio(occ_d / nd, occ_s / ns);
        out.c_od = ratio(od_d / nd, od_s / ns);
    }
    out
}

/// Drops every point that lands in the dynamic region of any listed frame.
pub fn remove_dynamic_projections(
    points: &[Vector3<f64>],
    frames: &[(Pose, Intrinsics, &BinaryMask)],
) -> Vec<Vector3<f64>> {
    points
        .iter()
        .filter(|p| {
            !frames.iter().any(|(pose, k, m)| {
                k.project_to_pixel(&pose.inverse_transform_point(p))
                    .is_some_and(|(u, v, _)| m.get(u, v))
            })
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::axis_angle;
    use proptest::prelude::*;

    fn k() -> Intrinsics {
        Intrinsics::new(20.0, 20.0, 8.0, 6.0, 16, 12).unwrap()
    }

    fn brute(points: &[Vector3<f64>], pose: &Pose, k: &Intrinsics, m: &BinaryMask) -> ProjectionCounts {
        let mut c = ProjectionCounts::default();
        let pix: Vec<Option<(usize, usize)>> = points
            .iter()
            .map(|p| {
                let q = pose.rotation().transpose() * (p - pose.translation());
                if q.z <= 0.0 {
                    return None;
                }
                let u = (k.fx * q.x / q.z + k.cx).round();
                let v = (k.fy * q.y / q.z + k.cy).round();
                (u >= 0.0 && v >= 0.0 && u < k.width as f64 && v < k.height as f64).then_some((u as usize, v as usize))
            })
            .collect();
        for y in 0..k.height {
            for x in 0..k.width {
                let n = pix.iter().filter(|h| **h == Some((x, y))).count();
                if m.get(x, y) {
                    c.area_dyn += 1;
                    c.n_dyn += n;
                    c.h_dyn += (n > 0) as usize;
                } else {
                    c.area_static += 1;
                    c.n_static += n;
                    c.h_static += (n > 0) as usize;
                }
            }
        }
        c
    }

    #[test]
    fn no_dynamic_hits_means_zero_density() {
        let m = BinaryMask::from_fn(16, 12, |x, _| x < 4);
        let pts = vec![Vector3::new(0.2, 0.0, 1.0), Vector3::new(0.25, 0.05, 1.0)];
        let c = projection_counts(&pts, &Pose::identity(), &k(), &m).unwrap();
        assert_eq!((c.n_dyn, c.n_static, c.h_static), (0, 2, 2));
        let r = contamination_ratios(&[c]);
        assert_eq!(r.c_den, Some(0.0));
    }

    #[test]
    fn empty_dynamic_region_is_excluded() {
        let full = BinaryMask::new(16, 12);
        let c = projection_counts(&[Vector3::new(0.0, 0.0, 1.0)], &Pose::identity(), &k(), &full).unwrap();
        let r = contamination_ratios(&[c]);
        assert_eq!(r.c_den, None);
        assert_eq!(r.frames_excluded, 1);
    }

    #[test]
    fn suppression_zeroes_dynamic_hits() {
        let m = BinaryMask::from_fn(16, 12, |x, y| x > 6 && y > 4);
        let pts: Vec<_> = (0..200)
            .map(|i| Vector3::new((i % 20) as f64 * 0.05 - 0.5, (i / 20) as f64 * 0.06 - 0.3, 1.0))
            .collect();
        let before = projection_counts(&pts, &Pose::identity(), &k(), &m).unwrap();
        assert!(before.n_dyn > 0);
        let kept = remove_dynamic_projections(&pts, &[(Pose::identity(), k(), &m)]);
        let after = projection_counts(&kept, &Pose::identity(), &k(), &m).unwrap();
        assert_eq!(after.n_dyn, 0);
        assert_eq!(after.n_static, before.n_static);
    }

    proptest! {
        #[test]
        fn counts_match_per_pixel_oracle(
            pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 0..200),
            bits in prop::collection::vec(any::<bool>(), 16 * 12),
            ax in prop::array::uniform3(-1.0f64..1.0),
            angle in -0.4f64..0.4,
        ) {
            let m = BinaryMask::from_bits(16, 12, bits).unwrap();
            let pose = Pose::new(axis_angle(&Vector3::from(ax), angle), Vector3::new(0.0, 0.0, -1.5)).unwrap();
            let pts: Vec<_> = pts.into_iter().map(Vector3::from).collect();
            prop_assert_eq!(projection_counts(&pts, &pose, &k(), &m).unwrap(), brute(&pts, &pose, &k(), &m));
        }

        #[test]
        fn invariant_under_rigid_motion(
            pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..100),
            ax in prop::array::uniform3(-1.0f64..1.0),
            angle in -3.0f64..3.0,
            t in prop::array::uniform3(-5.0f64..5.0),
        ) {
            let m = BinaryMask::from_fn(16, 12, |x, y| (x + y) % 3 == 0);
            let pose = Pose::new(nalgebra::Matrix3::identity(), Vector3::new(0.0, 0.0, -2.0)).unwrap();
            let g = Pose::new(axis_angle(&Vector3::from(ax), angle), Vector3::from(t)).unwrap();
            let pts: Vec<_> = pts.into_iter().map(Vector3::from).collect();
            let moved: Vec<_> = pts.iter().map(|p| g.transform_point(p)).collect();
            let a = projection_counts(&pts, &pose, &k(), &m).unwrap();
            let b = projection_counts(&moved, &g.compose(&pose), &k(), &m).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
