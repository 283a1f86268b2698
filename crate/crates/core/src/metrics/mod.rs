//! Evaluation metrics: overlap geometry consistency, density-normalized
//! contamination, depth coverage, camera-center residual, scale stability
//! and the auxiliary multi-surface ratio.
//!
//! Per-frame terms are computed in parallel and reduced in a fixed frame
//! order, so reports do not depend on the thread count.

pub mod contamination;
pub mod coverage;
pub mod geometry;
pub mod multisurface;
pub mod nn;
pub mod trajectory;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EvalMaskKind;
use crate::model::{BinaryMask, PointCloud};
use crate::sequence::ChunkedSequence;
use crate::stitch::{back_project, voxel_subsample, PixelFilter, StitchResult};

pub use contamination::{
    contamination_ratios, projection_counts, remove_dynamic_projections, ContaminationRatios,
    ProjectionCounts, OVERDRAW_EPS,
};
pub use coverage::{depth_coverage, summarize_coverage, Coverage, CoverageSummary};
pub use geometry::{overlap_geometry, symmetric_nn_distance, FrameGeometry, GeometrySeries, SkipRecord};
pub use multisurface::{frame_multi_surface, MultiSurfaceCounts, MultiSurfaceParams};
pub use nn::{nn_distance, KdTree};
pub use trajectory::{center_residual, residual_stats, scale_stability, ResidualStats, ScaleStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    /// Cap on back-projected points per frame for overlap geometry (0 = no cap).
    pub max_points_per_frame: usize,
    /// Voxel size for the chunk clouds used by contamination and the
    /// multi-surface ratio (0 = no subsampling).
    pub cloud_voxel: f64,
    pub multi_surface: MultiSurfaceParams,
    /// Evaluation mask sets to condition contamination and coverage on.
    pub kinds: Vec<EvalMaskKind>,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            max_points_per_frame: 20_000,
            cloud_voxel: 0.0,
            multi_surface: MultiSurfaceParams::default(),
            kinds: vec![EvalMaskKind::Instantaneous, EvalMaskKind::Footprint],
        }
    }
}

/// Metric terms of one chunk at one of its frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub chunk: usize,
    pub frame: usize,
    pub counts: ProjectionCounts,
    pub coverage: Coverage,
    pub multi_surface: MultiSurfaceCounts,
}

/// Results conditioned on one evaluation mask set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskReport {
    pub kind: EvalMaskKind,
    pub contamination: ContaminationRatios,
    pub coverage: CoverageSummary,
    /// Multi-surface ratio; an auxiliary indicator, confounded by depth holes.
    pub rho_auxiliary: Option<f64>,
    pub multi_surface: MultiSurfaceCounts,
    pub frames: Vec<FrameMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub variant: String,
    pub transitions: usize,
    pub e_cen: Option<ResidualStats>,
    pub scale: Option<ScaleStats>,
    pub rigid_fallbacks: usize,
    pub b_all: Option<f64>,
    pub b_static: Option<f64>,
    pub overlap_all: GeometrySeries,
    pub overlap_static: Option<GeometrySeries>,
    pub masks: Vec<MaskReport>,
}

/// Back-projects every frame of `chunk` in chunk-local coordinates. Pixels set
/// in `suppress[frame]` are left out.
pub fn chunk_cloud(
    seq: &dyn ChunkedSequence,
    chunk: usize,
    suppress: Option<&[BinaryMask]>,
    voxel: f64,
) -> Result<PointCloud> {
    let plan = seq
        .plans()
        .get(chunk)
        .ok_or_else(|| Error::Consistency(format!("no chunk {chunk}")))?;
    let mut points = Vec::new();
    for f in plan.frames() {
        let depth = seq.chunk_depth(chunk, f)?;
        let pose = seq.local_pose(chunk, f)?;
        let filter = match suppress {
            Some(masks) => PixelFilter::Outside(masks.get(f).ok_or_else(|| {
                Error::Consistency(format!("no suppression mask for frame {f}"))
            })?),
            None => PixelFilter::All,
        };
        points.extend(back_project(&depth, &pose, filter)?.into_points());
    }
    voxel_subsample(&PointCloud::new(points)?, voxel)
}

/// Chunk clouds for every chunk, in chunk order.
pub fn chunk_clouds(
    seq: &dyn ChunkedSequence,
    suppress: Option<&[BinaryMask]>,
    voxel: f64,
) -> Result<Vec<PointCloud>> {
    (0..seq.plans().len())
        .into_par_iter()
        .map(|c| chunk_cloud(seq, c, suppress, voxel))
        .collect()
}

/// Contamination, coverage and multi-surface terms for every (chunk, frame)
/// pair, conditioned on `kind`. `clouds[c]` is chunk `c`'s cloud in its local
/// coordinates.
pub fn mask_report(
    seq: &dyn ChunkedSequence,
    clouds: &[PointCloud],
    kind: EvalMaskKind,
    params: &MultiSurfaceParams,
) -> Result<MaskReport> {
    if clouds.len() != seq.plans().len() {
        return Err(Error::Consistency(format!(
            "{} clouds for {} chunks",
            clouds.len(),
            seq.plans().len()
        )));
    }
    let jobs: Vec<(usize, usize)> = seq
        .plans()
        .iter()
        .flat_map(|p| p.frames().map(move |f| (p.chunk_id, f)))
        .collect();
    let frames: Vec<FrameMetrics> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let mask = seq.eval_mask(kind, f)?;
            let depth = seq.chunk_depth(c, f)?;
            let pose = seq.local_pose(c, f)?;
            let points = clouds[c].points();
            Ok(FrameMetrics {
                chunk: c,
                frame: f,
                counts: projection_counts(points, &pose, depth.intrinsics(), &mask)?,
                coverage: depth_coverage(&depth, &mask)?,
                multi_surface: frame_multi_surface(points, &pose, &depth, &mask, params)?,
            })
        })
        .collect::<Result<_>>()?;

    let counts: Vec<ProjectionCounts> = frames.iter().map(|f| f.counts).collect();
    let cov: Vec<Coverage> = frames.iter().map(|f| f.coverage).collect();
    let mut ms = MultiSurfaceCounts::default();
    for f in &frames {
        ms.multi += f.multi_surface.multi;
        ms.eligible += f.multi_surface.eligible;
    }
    Ok(MaskReport {
        kind,
        contamination: contamination_ratios(&counts),
        coverage: summarize_coverage(&cov),
        rho_auxiliary: ms.ratio(),
        multi_surface: ms,
        frames,
    })
}

/// Full metric suite for one variant. `suppress`, when given, holds one mask
/// per frame whose pixels are kept out of the chunk clouds used for
/// contamination and the multi-surface ratio.
pub fn evaluate(
    seq: &dyn ChunkedSequence,
    stitched: &StitchResult,
    params: &MetricParams,
    suppress: Option<&[BinaryMask]>,
    variant: &str,
) -> Result<MetricReport> {
    if !params.kinds.is_empty() && !seq.has_eval_masks() {
        return Err(Error::Config(
            "evaluation masks requested but the sequence has none".into(),
        ));
    }
    let residuals: Vec<f64> = stitched
        .overlaps
        .iter()
        .zip(&stitched.transforms[1..])
        .map(|(pair, s)| center_residual(pair, s))
        .collect();
    let overlap_all = overlap_geometry(seq, &stitched.transforms, None, params.max_points_per_frame)?;
    let overlap_static = if seq.has_eval_masks() {
        Some(overlap_geometry(
            seq,
            &stitched.transforms,
            Some(EvalMaskKind::Footprint),
            params.max_points_per_frame,
        )?)
    } else {
        None
    };
    let masks = if params.kinds.is_empty() {
        Vec::new()
    } else {
        let clouds = chunk_clouds(seq, suppress, params.cloud_voxel)?;
        params
            .kinds
            .iter()
            .map(|&k| mask_report(seq, &clouds, k, &params.multi_surface))
            .collect::<Result<_>>()?
    };
    Ok(MetricReport {
        variant: variant.to_string(),
        transitions: stitched.transitions.len(),
        e_cen: residual_stats(&residuals),
        scale: scale_stability(&stitched.scales()),
        rigid_fallbacks: stitched.transitions.iter().filter(|t| t.rigid_fallback).count(),
        b_all: overlap_all.mean,
        b_static: overlap_static.as_ref().and_then(|s| s.mean),
        overlap_all,
        overlap_static,
        masks,
    })
}

const CSV_HEADER: &str = "variant,mask,e_cen_mean,e_cen_median,s_mean,s_geometric,B_all,B_static,C_den,C_occ,C_od,D_all,D_dyn,D_static,rho_aux";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat table, one row per variant and mask kind.
pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let common = [
            cell(r.e_cen.map(|e| e.mean)),
            cell(r.e_cen.map(|e| e.median)),
            cell(r.scale.map(|s| s.mean)),
            cell(r.scale.map(|s| s.geometric_mean)),
            cell(r.b_all),
            cell(r.b_static),
        ]
        .join(",");
        if r.masks.is_empty() {
            let _ = writeln!(out, "{},none,{common},,,,,,,", r.variant);
        }
        for m in &r.masks {
            let _ = writeln!(
                out,
                "{},{},{common},{},{},{},{},{},{},{}",
                r.variant,
                m.kind.dir_name(),
                cell(m.contamination.c_den),
                cell(m.contamination.c_occ),
                cell(m.contamination.c_od),
                cell(m.coverage.d_all),
                cell(m.coverage.d_dyn),
                cell(m.coverage.d_static),
                cell(m.rho_auxiliary),
            );
        }
    }
    out
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        reports_csv(std::slice::from_ref(self))
    }

    pub fn save(&self, json_path: impl AsRef<Path>, csv_path: impl AsRef<Path>) -> Result<()> {
        let (jp, cp) = (json_path.as_ref(), csv_path.as_ref());
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(jp, text + "\n").map_err(|e| Error::io(jp, e))?;
        fs::write(cp, self.to_csv()).map_err(|e| Error::io(cp, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}
