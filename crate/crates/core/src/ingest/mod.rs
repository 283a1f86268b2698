//! Readers and writers for every interchange file, plus the sequence manifest.

pub mod manifest;
pub mod pfm;
pub mod pgm;
pub mod ply;
pub mod poses;
pub mod tracks;

pub use manifest::{
    frame_file_name, save_manifest, ChunkParams, ChunkRecord, EvalMaskDirs, EvalMaskKind,
    FrameRecord, ManifestDoc, SequenceManifest,
};
pub use pfm::{load_depth, read_pfm, save_depth, write_pfm, FloatRaster};
pub use pgm::{load_mask, save_mask};
pub use ply::{load_pointcloud, save_pointcloud};
pub use poses::{load_poses, save_poses};
pub use tracks::{
    load_track_index, save_track_index, Category, FrameMasks, InMemoryMasks, MaskSource, Track,
    TrackId, TrackIndex, TrackMaskFiles,
};
