//! Chunk planning, overlap Sim(3) alignment and global composition.
//!
//! Chunk 0 anchors the global frame. Every later chunk is aligned to the
//! already-stitched trajectory through the camera centers of the frames it
//! shares with its predecessor; each frame then takes its global pose from the
//! earliest chunk that contains it.

pub mod fuse;
pub mod plan;
pub mod umeyama;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChunkPlan, Pose, Sim3};

pub use fuse::{back_project, fuse, voxel_subsample, PixelFilter};
pub use plan::{owner_chunk, plan_chunks};
pub use umeyama::{residual_rmse, rigid_fit, umeyama, Fit};

/// Corresponded camera centers over the frames a chunk shares with its predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPair {
    pub prev_chunk: usize,
    pub chunk: usize,
    pub frames: Vec<usize>,
    /// Chunk-local centers of `chunk`.
    pub x: Vec<Vector3<f64>>,
    /// Already-stitched global centers of the same frames.
    pub y: Vec<Vector3<f64>>,
}

impl OverlapPair {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Outcome of aligning one chunk onto the stitched trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub chunk: usize,
    /// Number of overlap frames.
    #[serde(rename = "L")]
    pub overlap_len: usize,
    pub scale: f64,
    /// Center RMSE after alignment.
    pub e_cen: f64,
    /// Center RMSE with the chunk left in its own frame.
    pub raw_rmse: f64,
    /// The overlap was collinear and a fixed-scale rigid fit was used.
    pub rigid_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchResult {
    /// `S_c` per chunk; the first is the identity.
    pub transforms: Vec<Sim3>,
    /// Global camera-to-world pose of every frame.
    pub global_poses: BTreeMap<usize, Pose>,
    /// One entry per chunk after the first.
    pub transitions: Vec<Transition>,
    pub overlaps: Vec<OverlapPair>,
}

impl StitchResult {
    pub fn scales(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.scale).collect()
    }

    pub fn global_trajectory(&self) -> Vec<(usize, Pose)> {
        self.global_poses.iter().map(|(f, p)| (*f, *p)).collect()
    }

    pub fn to_doc(&self) -> StitchDoc {
        StitchDoc {
            chunks: self
                .transforms
                .iter()
                .enumerate()
                .map(|(c, s)| ChunkTransformDoc {
                    chunk: c,
                    s: s.scale(),
                    r: row_major(s.rotation()),
                    t: [s.translation().x, s.translation().y, s.translation().z],
                })
                .collect(),
            transitions: self.transitions.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_doc()).expect("stitch result serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkTransformDoc {
    pub chunk: usize,
    pub s: f64,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

/// Serialized form of a [`StitchResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchDoc {
    pub chunks: Vec<ChunkTransformDoc>,
    pub transitions: Vec<Transition>,
}

impl StitchDoc {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Rebuilds the per-chunk transforms, validating each one.
    pub fn transforms(&self) -> Result<Vec<Sim3>> {
        self.chunks
            .iter()
            .map(|c| {
                Sim3::new(
                    c.s,
                    Matrix3::from_row_slice(&c.r),
                    Vector3::new(c.t[0], c.t[1], c.t[2]),
                )
            })
            .collect()
    }
}

fn local_pose(poses: &[BTreeMap<usize, Pose>], chunk: usize, frame: usize) -> Result<&Pose> {
    poses[chunk].get(&frame).ok_or_else(|| {
        Error::Consistency(format!("chunk {chunk} has no pose for frame {frame}"))
    })
}

/// Stitches chunk-local trajectories into one global trajectory.
///
/// `chunk_poses[c]` maps frame id to the chunk-local camera-to-world pose and
/// must cover every frame of `plans[c]`.
pub fn stitch(chunk_poses: &[BTreeMap<usize, Pose>], plans: &[ChunkPlan]) -> Result<StitchResult> {
    if chunk_poses.len() != plans.len() {
        return Err(Error::Consistency(format!(
            "{} pose sets for {} chunks",
            chunk_poses.len(),
            plans.len()
        )));
    }
    let mut transforms = Vec::with_capacity(plans.len());
    let mut global_poses = BTreeMap::new();
    let mut transitions = Vec::new();
    let mut overlaps = Vec::new();
    let mut prev_scale = 1.0;

    for (c, plan) in plans.iter().enumerate() {
        let s_c = if c == 0 {
            Sim3::identity()
        } else {
            let frames: Vec<usize> = plan.overlap().collect();
            let x = frames
                .iter()
                .map(|&f| local_pose(chunk_poses, c, f).map(Pose::center))
                .collect::<Result<Vec<_>>>()?;
            let y = frames
                .iter()
                .map(|&f| {
                    global_poses
                        .get(&f)
                        .map(Pose::center)
                        .ok_or_else(|| Error::Consistency(format!("frame {f} has no stitched pose")))
                })
                .collect::<Result<Vec<_>>>()?;
            let (fit, rigid_fallback) = match umeyama(&x, &y) {
                Ok(fit) => (fit, false),
                Err(Error::DegenerateGeometry(why)) => {
                    log::warn!(
                        "chunk {c}: {why}; falling back to a rigid fit at scale {prev_scale}"
                    );
                    (rigid_fit(&x, &y, prev_scale)?, true)
                }
                Err(e) => return Err(e),
            };
            prev_scale = fit.transform.scale();
            transitions.push(Transition {
                chunk: c,
                overlap_len: frames.len(),
                scale: fit.transform.scale(),
                e_cen: fit.rmse,
                raw_rmse: residual_rmse(&x, &y, &Sim3::identity()),
                rigid_fallback,
            });
            overlaps.push(OverlapPair {
                prev_chunk: c - 1,
                chunk: c,
                frames,
                x,
                y,
            });
            fit.transform
        };
        for frame in plan.frames() {
            let local = local_pose(chunk_poses, c, frame)?;
            global_poses
                .entry(frame)
                .or_insert_with(|| s_c.compose_pose(local));
        }
        transforms.push(s_c);
    }

    Ok(StitchResult {
        transforms,
        global_poses,
        transitions,
        overlaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::axis_angle;

    fn trajectory(frames: std::ops::Range<usize>) -> BTreeMap<usize, Pose> {
        frames
            .map(|f| {
                let a = f as f64 * 0.1;
                let r = axis_angle(&Vector3::y(), a);
                (f, Pose::new(r, Vector3::new(a.cos() * 3.0, 0.2 * a.sin(), a.sin() * 3.0)).unwrap())
            })
            .collect()
    }

    fn drifted(poses: &BTreeMap<usize, Pose>, g: &Sim3) -> BTreeMap<usize, Pose> {
        poses.iter().map(|(f, p)| (*f, g.compose_pose(p))).collect()
    }

    #[test]
    fn single_chunk_is_identity() {
        let plans = plan_chunks(10, 20, 5).unwrap();
        let poses = vec![trajectory(0..10)];
        let res = stitch(&poses, &plans).unwrap();
        assert_eq!(res.transforms, vec![Sim3::identity()]);
        assert_eq!(res.global_poses, poses[0]);
        assert!(res.transitions.is_empty());
    }

    #[test]
    fn two_chunk_drift_is_undone() {
        let plans = plan_chunks(30, 20, 5).unwrap();
        let gt = trajectory(0..30);
        let g = Sim3::new(1.3, axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.2), Vector3::new(0.5, -0.2, 0.1)).unwrap();
        let local2: BTreeMap<_, _> = drifted(&gt, &g.inverse()).into_iter().filter(|(f, _)| *f >= 15).collect();
        let local1: BTreeMap<_, _> = gt.iter().filter(|(f, _)| **f < 20).map(|(f, p)| (*f, *p)).collect();
        let res = stitch(&[local1, local2], &plans).unwrap();
        assert_eq!(res.transforms[0].scale(), 1.0);
        assert!((res.transforms[1].to_matrix() - g.to_matrix()).abs().max() < 1e-9);
        assert!(res.transitions[0].e_cen < 1e-9);
        assert!(res.transitions[0].raw_rmse > 0.1);
        for (f, p) in &res.global_poses {
            assert!((p.center() - gt[f].center()).norm() < 1e-9);
        }
    }

    #[test]
    fn missing_pose_and_short_overlap() {
        let plans = plan_chunks(30, 20, 5).unwrap();
        let gt = trajectory(0..30);
        let mut local2: BTreeMap<_, _> = gt.iter().filter(|(f, _)| **f >= 15).map(|(f, p)| (*f, *p)).collect();
        local2.remove(&17);
        assert!(matches!(stitch(&[gt.clone(), local2], &plans), Err(Error::Consistency(_))));

        let plans = plan_chunks(30, 20, 2).unwrap();
        let err = stitch(&[gt.clone(), gt.clone()], &plans).unwrap_err();
        assert!(matches!(err, Error::InsufficientOverlap { needed: 3, got: 2 }));
    }

    #[test]
    fn straight_line_overlap_uses_rigid_fallback() {
        let plans = plan_chunks(30, 20, 5).unwrap();
        let line: BTreeMap<_, _> = (0..30)
            .map(|f| (f, Pose::new(Matrix3::identity(), Vector3::new(f as f64, 0.0, 0.0)).unwrap()))
            .collect();
        let res = stitch(&[line.clone(), line], &plans).unwrap();
        assert!(res.transitions[0].rigid_fallback);
        assert_eq!(res.transitions[0].scale, 1.0);
        assert!(res.transitions[0].e_cen < 1e-12);
    }

    #[test]
    fn serialized_document_round_trips() {
        let plans = plan_chunks(30, 20, 5).unwrap();
        let gt = trajectory(0..30);
        let res = stitch(&[gt.clone(), gt], &plans).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stitch.json");
        res.save(&p).unwrap();
        let doc = StitchDoc::load(&p).unwrap();
        assert_eq!(doc.transitions, res.transitions);
        let ts = doc.transforms().unwrap();
        assert_eq!(ts.len(), 2);
        assert!((ts[1].to_matrix() - res.transforms[1].to_matrix()).abs().max() < 1e-15);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"R\"") && text.contains("\"L\""));
    }
}
