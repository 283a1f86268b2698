use std::ops::Range;

use serde::{Deserialize, Serialize};

/// One temporal window of the sequence, `[start, end)`.
///
/// `overlap_start..overlap_end` is the frame range shared with the previous
/// chunk; it is empty for the first chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub chunk_id: usize,
    pub start: usize,
    pub end: usize,
    pub overlap_start: usize,
    pub overlap_end: usize,
}

impl ChunkPlan {
    pub fn frames(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn overlap(&self) -> Range<usize> {
        self.overlap_start..self.overlap_end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..self.end).contains(&frame)
    }
}
