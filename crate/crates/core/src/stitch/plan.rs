use crate::error::{Error, Result};
use crate::model::ChunkPlan;

/// Splits `[0, frame_count)` into windows of `chunk_length` frames whose starts
/// advance by `chunk_length - overlap`. A window starts at every such offset
/// below `frame_count`; the last windows may be short.
pub fn plan_chunks(frame_count: usize, chunk_length: usize, overlap: usize) -> Result<Vec<ChunkPlan>> {
    if frame_count == 0 {
        return Err(Error::Config("frame count must be at least 1".into()));
    }
    if chunk_length == 0 {
        return Err(Error::Config("chunk length must be at least 1".into()));
    }
    if overlap >= chunk_length {
        return Err(Error::Config(format!(
            "overlap ({overlap}) must be smaller than chunk length ({chunk_length})"
        )));
    }
    let stride = chunk_length - overlap;
    let mut plans: Vec<ChunkPlan> = Vec::new();
    let mut start = 0;
    while start < frame_count {
        let end = (start + chunk_length).min(frame_count);
        let (overlap_start, overlap_end) = match plans.last() {
            Some(prev) => (start, prev.end),
            None => (start, start),
        };
        plans.push(ChunkPlan {
            chunk_id: plans.len(),
            start,
            end,
            overlap_start,
            overlap_end: overlap_end.max(overlap_start),
        });
        start += stride;
    }
    Ok(plans)
}

/// Earliest chunk containing `frame`; that chunk supplies the frame's global pose.
pub fn owner_chunk(plans: &[ChunkPlan], frame: usize) -> Option<usize> {
    plans.iter().position(|p| p.contains(frame))
}
