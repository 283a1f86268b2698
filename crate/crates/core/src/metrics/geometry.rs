use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EvalMaskKind;
use crate::metrics::nn::{mean_nn_distance, KdTree};
use crate::model::Sim3;
use crate::sequence::ChunkedSequence;
use crate::stitch::{back_project, PixelFilter};

/// `½·(mean_{q∈b} d(q, a) + mean_{p∈a} d(p, b))`.
pub fn symmetric_nn_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    Ok(0.5 * (mean_nn_distance(b, &ta)? + mean_nn_distance(a, &tb)?))
}

/// Keeps every `⌈n / max⌉`-th point so at most `max` remain. `max = 0` keeps all.
pub fn stride_subsample(points: Vec<Vector3<f64>>, max: usize) -> Vec<Vector3<f64>> {
    if max == 0 || points.len() <= max {
        return points;
    }
    let step = points.len().div_ceil(max);
    points.into_iter().step_by(step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    /// The later chunk of the transition.
    pub chunk: usize,
    pub frame: usize,
    pub d_geo: f64,
}

/// An overlap frame left out of an expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub chunk: usize,
    pub frame: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeometrySeries {
    pub per_frame: Vec<FrameGeometry>,
    pub skipped: Vec<SkipRecord>,
    /// Mean of `d_geo` over the frames that were not skipped.
    pub mean: Option<f64>,
}

/// Overlap geometry consistency for every transition.
///
/// For overlap frame `t` of chunk `c`, the previous chunk's back-projected
/// depth is compared with chunk `c`'s, mapped into the previous chunk's
/// coordinates by `S_{c-1}⁻¹ ∘ S_c`. With `static_mask` set, only pixels clear
/// in that evaluation mask are lifted, on both sides.
pub fn overlap_geometry(
    seq: &dyn ChunkedSequence,
    transforms: &[Sim3],
    static_mask: Option<EvalMaskKind>,
    max_points_per_frame: usize,
) -> Result<GeometrySeries> {
    let plans = seq.plans();
    if transforms.len() != plans.len() {
        return Err(Error::Consistency(format!(
            "{} transforms for {} chunks",
            transforms.len(),
            plans.len()
        )));
    }
    let jobs: Vec<(usize, usize)> = plans
        .iter()
        .skip(1)
        .flat_map(|p| p.overlap().map(move |f| (p.chunk_id, f)))
        .collect();
    let results: Vec<Result<std::result::Result<FrameGeometry, SkipRecord>>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let mask = match static_mask {
                Some(kind) => Some(seq.eval_mask(kind, f)?),
                None => None,
            };
            let filter = mask.as_ref().map_or(PixelFilter::All, PixelFilter::Outside);
            let lift = |chunk: usize| -> Result<Vec<Vector3<f64>>> {
                let depth = seq.chunk_depth(chunk, f)?;
                let pose = seq.local_pose(chunk, f)?;
                let cloud = back_project(&depth, &pose, filter)?;
                Ok(stride_subsample(cloud.into_points(), max_points_per_frame))
            };
            let prev = lift(c - 1)?;
            let rel = transforms[c - 1].inverse().compose(&transforms[c]);
            let cur: Vec<_> = lift(c)?.iter().map(|p| rel.apply(p)).collect();
            Ok(match symmetric_nn_distance(&prev, &cur) {
                Ok(d_geo) => Ok(FrameGeometry { chunk: c, frame: f, d_geo }),
                Err(Error::EmptySet) => Err(SkipRecord {
                    chunk: c,
                    frame: f,
                    reason: format!(
                        "empty point set ({} vs {} points)",
                        prev.len(),
                        cur.len()
                    ),
                }),
                Err(e) => return Err(e),
            })
        })
        .collect();

    let mut series = GeometrySeries::default();
    for r in results {
        match r? {
            Ok(g) => series.per_frame.push(g),
            Err(skip) => {
                log::info!("overlap frame {} of chunk {} skipped: {}", skip.frame, skip.chunk, skip.reason);
                series.skipped.push(skip);
            }
        }
    }
    if !series.per_frame.is_empty() {
        let sum: f64 = series.per_frame.iter().map(|g| g.d_geo).sum();
        series.mean = Some(sum / series.per_frame.len() as f64);
    }
    Ok(series)
}
