//! Read access to a chunked sequence, independent of where it is stored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::{EvalMaskKind, SequenceManifest};
use crate::model::{BinaryMask, ChunkPlan, DepthFrame, Pose};

/// Chunk-local reconstruction outputs plus evaluation masks.
pub trait ChunkedSequence: Sync {
    fn plans(&self) -> &[ChunkPlan];

    /// Chunk-local camera-to-world pose of `frame` in `chunk`.
    fn local_pose(&self, chunk: usize, frame: usize) -> Result<Pose>;

    /// Depth predicted by `chunk` for `frame`.
    fn chunk_depth(&self, chunk: usize, frame: usize) -> Result<DepthFrame>;

    fn eval_mask(&self, kind: EvalMaskKind, frame: usize) -> Result<BinaryMask>;

    fn has_eval_masks(&self) -> bool;

    fn frame_count(&self) -> usize {
        self.plans().last().map_or(0, |p| p.end)
    }

    /// Every chunk's local trajectory, in the shape the stitcher takes.
    fn all_local_poses(&self) -> Result<Vec<BTreeMap<usize, Pose>>> {
        self.plans()
            .iter()
            .map(|p| {
                p.frames()
                    .map(|f| Ok((f, self.local_pose(p.chunk_id, f)?)))
                    .collect()
            })
            .collect()
    }
}

impl ChunkedSequence for SequenceManifest {
    fn plans(&self) -> &[ChunkPlan] {
        SequenceManifest::plans(self)
    }

    fn local_pose(&self, chunk: usize, frame: usize) -> Result<Pose> {
        self.chunk_poses(chunk)
            .get(&frame)
            .copied()
            .ok_or_else(|| Error::Consistency(format!("chunk {chunk} has no pose for frame {frame}")))
    }

    fn chunk_depth(&self, chunk: usize, frame: usize) -> Result<DepthFrame> {
        self.load_chunk_depth(chunk, frame)
    }

    fn eval_mask(&self, kind: EvalMaskKind, frame: usize) -> Result<BinaryMask> {
        self.load_eval_mask(kind, frame)
    }

    fn has_eval_masks(&self) -> bool {
        SequenceManifest::has_eval_masks(self)
    }

    fn frame_count(&self) -> usize {
        SequenceManifest::frame_count(self)
    }
}

/// A sequence held entirely in memory.
#[derive(Debug, Clone)]
pub struct InMemorySequence {
    pub plans: Vec<ChunkPlan>,
    /// Per chunk: frame id to local pose.
    pub poses: Vec<BTreeMap<usize, Pose>>,
    /// Per chunk: frame id to chunk depth.
    pub depths: Vec<BTreeMap<usize, DepthFrame>>,
    pub instantaneous: Vec<BinaryMask>,
    pub footprint: Vec<BinaryMask>,
}

impl ChunkedSequence for InMemorySequence {
    fn plans(&self) -> &[ChunkPlan] {
        &self.plans
    }

    fn local_pose(&self, chunk: usize, frame: usize) -> Result<Pose> {
        self.poses
            .get(chunk)
            .and_then(|m| m.get(&frame))
            .copied()
            .ok_or_else(|| Error::Consistency(format!("chunk {chunk} has no pose for frame {frame}")))
    }

    fn chunk_depth(&self, chunk: usize, frame: usize) -> Result<DepthFrame> {
        self.depths
            .get(chunk)
            .and_then(|m| m.get(&frame))
            .cloned()
            .ok_or_else(|| Error::Consistency(format!("chunk {chunk} has no depth for frame {frame}")))
    }

    fn eval_mask(&self, kind: EvalMaskKind, frame: usize) -> Result<BinaryMask> {
        let set = match kind {
            EvalMaskKind::Instantaneous => &self.instantaneous,
            EvalMaskKind::Footprint => &self.footprint,
        };
        set.get(frame)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no {} mask for frame {frame}", kind.dir_name())))
    }

    fn has_eval_masks(&self) -> bool {
        !self.instantaneous.is_empty() && !self.footprint.is_empty()
    }
}
