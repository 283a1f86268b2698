//! Sequence manifest: the JSON document tying frames, chunks, poses, depths,
//! mask tracks and evaluation masks together.
//!
//! All paths are relative to the directory holding the manifest. Loading a
//! manifest validates every referenced file, so downstream stages can rely on
//! their inputs being present and consistently sized.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::pfm::{load_depth, read_pfm_dims};
use crate::ingest::pgm::load_mask;
use crate::ingest::poses::load_poses;
use crate::ingest::tracks::{expand_pattern, load_track_index, TrackIndex, TrackMaskFiles};
use crate::model::{BinaryMask, ChunkPlan, DepthFrame, Intrinsics, Pose};
use crate::stitch::plan::plan_chunks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkParams {
    pub chunk_length: usize,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: usize,
    pub depth: String,
    pub intrinsics: Intrinsics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_id: usize,
    pub poses: String,
    /// Chunk-local depth pattern (`{frame:06}` substituted). Falls back to the
    /// frame-level depth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMaskDirs {
    pub union_mask_dynamics: String,
    pub union_mask_fulltime: String,
}

/// Which evaluation mask set conditions a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMaskKind {
    /// Per-frame instantaneous dynamic regions (`union_mask_dynamics`).
    Instantaneous,
    /// Dynamic footprint, every pixel ever dynamic so far (`union_mask_fulltime`).
    Footprint,
}

impl EvalMaskKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            EvalMaskKind::Instantaneous => "union_mask_dynamics",
            EvalMaskKind::Footprint => "union_mask_fulltime",
        }
    }
}

/// On-disk manifest document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestDoc {
    pub frame_count: usize,
    pub fps: f64,
    pub chunking: ChunkParams,
    pub frames: Vec<FrameRecord>,
    pub chunks: Vec<ChunkRecord>,
    pub tracks: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_masks: Option<EvalMaskDirs>,
}

/// File name of a per-frame raster in a mask directory.
pub fn frame_file_name(frame: usize, ext: &str) -> String {
    format!("{frame:06}.{ext}")
}

/// A manifest whose references have all been checked.
#[derive(Debug, Clone)]
pub struct SequenceManifest {
    root: PathBuf,
    doc: ManifestDoc,
    plans: Vec<ChunkPlan>,
    tracks: TrackIndex,
    chunk_poses: Vec<BTreeMap<usize, Pose>>,
}

impl SequenceManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ManifestDoc =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Self::from_doc(root, doc)
    }

    /// Validates `doc` against files under `root`.
    pub fn from_doc(root: PathBuf, doc: ManifestDoc) -> Result<Self> {
        let t = doc.frame_count;
        if !(doc.fps.is_finite() && doc.fps > 0.0) {
            return Err(Error::Validation(format!("fps must be positive, got {}", doc.fps)));
        }
        let plans = plan_chunks(t, doc.chunking.chunk_length, doc.chunking.overlap)?;
        if doc.frames.len() != t
            || doc.frames.iter().enumerate().any(|(i, f)| f.frame_id != i)
        {
            return Err(Error::Consistency(format!(
                "frame records must list frame ids 0..{t} in order"
            )));
        }
        if doc.chunks.len() != plans.len()
            || doc.chunks.iter().enumerate().any(|(i, c)| c.chunk_id != i)
        {
            return Err(Error::Consistency(format!(
                "chunking {}/{} over {t} frames yields {} chunks; manifest lists {}",
                doc.chunking.chunk_length,
                doc.chunking.overlap,
                plans.len(),
                doc.chunks.len()
            )));
        }

        for f in &doc.frames {
            f.intrinsics.validate()?;
            check_depth_header(&root.join(&f.depth), &f.intrinsics)?;
        }

        let mut chunk_poses = Vec::with_capacity(plans.len());
        for (rec, plan) in doc.chunks.iter().zip(&plans) {
            let poses_path = root.join(&rec.poses);
            let poses: BTreeMap<usize, Pose> = load_poses(&poses_path)?.into_iter().collect();
            let expected: Vec<usize> = plan.frames().collect();
            let got: Vec<usize> = poses.keys().copied().collect();
            if got != expected {
                return Err(Error::Consistency(format!(
                    "{}: chunk {} must hold poses for frames {}..{}",
                    poses_path.display(),
                    plan.chunk_id,
                    plan.start,
                    plan.end
                )));
            }
            if let Some(pattern) = &rec.depth {
                for frame in plan.frames() {
                    let p = root.join(expand_pattern(pattern, frame, None));
                    check_depth_header(&p, &doc.frames[frame].intrinsics)?;
                }
            }
            chunk_poses.push(poses);
        }

        let tracks_path = root.join(&doc.tracks);
        let tracks = load_track_index(&tracks_path)?;
        tracks.validate(t)?;
        let mask_files = TrackMaskFiles::new(tracks_path.parent().unwrap_or(&root), tracks.clone());
        for track in &tracks.tracks {
            for frame in 0..t {
                let p = mask_files.mask_path(track, frame);
                if p.exists() {
                    check_mask(&p, &doc.frames[frame].intrinsics)?;
                }
            }
        }

        if let Some(eval) = &doc.eval_masks {
            for dir in [&eval.union_mask_dynamics, &eval.union_mask_fulltime] {
                for frame in 0..t {
                    let p = root.join(dir).join(frame_file_name(frame, "pgm"));
                    check_mask(&p, &doc.frames[frame].intrinsics)?;
                }
            }
        }

        Ok(Self {
            root,
            doc,
            plans,
            tracks,
            chunk_poses,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn doc(&self) -> &ManifestDoc {
        &self.doc
    }

    pub fn frame_count(&self) -> usize {
        self.doc.frame_count
    }

    pub fn plans(&self) -> &[ChunkPlan] {
        &self.plans
    }

    pub fn tracks(&self) -> &TrackIndex {
        &self.tracks
    }

    pub fn intrinsics(&self, frame: usize) -> &Intrinsics {
        &self.doc.frames[frame].intrinsics
    }

    /// Image size `(width, height)` of a frame.
    pub fn frame_dims(&self, frame: usize) -> (usize, usize) {
        let k = self.intrinsics(frame);
        (k.width, k.height)
    }

    pub fn chunk_poses(&self, chunk: usize) -> &BTreeMap<usize, Pose> {
        &self.chunk_poses[chunk]
    }

    pub fn all_chunk_poses(&self) -> &[BTreeMap<usize, Pose>] {
        &self.chunk_poses
    }

    pub fn mask_files(&self) -> TrackMaskFiles {
        let tracks_path = self.root.join(&self.doc.tracks);
        TrackMaskFiles::new(
            tracks_path.parent().unwrap_or(&self.root).to_path_buf(),
            self.tracks.clone(),
        )
    }

    /// Frame-level depth.
    pub fn load_frame_depth(&self, frame: usize) -> Result<DepthFrame> {
        let rec = &self.doc.frames[frame];
        load_depth(self.root.join(&rec.depth), frame, rec.intrinsics)
    }

    /// Depth produced by `chunk` for `frame`, falling back to the frame-level depth.
    pub fn load_chunk_depth(&self, chunk: usize, frame: usize) -> Result<DepthFrame> {
        match &self.doc.chunks[chunk].depth {
            Some(pattern) => load_depth(
                self.root.join(expand_pattern(pattern, frame, None)),
                frame,
                *self.intrinsics(frame),
            ),
            None => self.load_frame_depth(frame),
        }
    }

    pub fn has_eval_masks(&self) -> bool {
        self.doc.eval_masks.is_some()
    }

    pub fn eval_mask_path(&self, kind: EvalMaskKind, frame: usize) -> Result<PathBuf> {
        let eval = self.doc.eval_masks.as_ref().ok_or_else(|| {
            Error::Config("manifest has no evaluation mask directories".into())
        })?;
        let dir = match kind {
            EvalMaskKind::Instantaneous => &eval.union_mask_dynamics,
            EvalMaskKind::Footprint => &eval.union_mask_fulltime,
        };
        Ok(self.root.join(dir).join(frame_file_name(frame, "pgm")))
    }

    pub fn load_eval_mask(&self, kind: EvalMaskKind, frame: usize) -> Result<BinaryMask> {
        load_mask(self.eval_mask_path(kind, frame)?)
    }
}

fn check_depth_header(path: &Path, k: &Intrinsics) -> Result<()> {
    let (w, h) = read_pfm_dims(path)?;
    if (w, h) != (k.width, k.height) {
        return Err(Error::Consistency(format!(
            "{}: depth is {w}x{h}, manifest expects {}x{}",
            path.display(),
            k.width,
            k.height
        )));
    }
    Ok(())
}

fn check_mask(path: &Path, k: &Intrinsics) -> Result<()> {
    let m = load_mask(path)?;
    if m.dims() != (k.width, k.height) {
        return Err(Error::Consistency(format!(
            "{}: mask is {}x{}, frame is {}x{}",
            path.display(),
            m.width(),
            m.height(),
            k.width,
            k.height
        )));
    }
    Ok(())
}

pub fn save_manifest(doc: &ManifestDoc, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(doc).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
