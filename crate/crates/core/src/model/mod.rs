//! Geometric and raster value types shared across the crate.

pub mod camera;
pub mod chunk;
pub mod cloud;
pub mod mask;
pub mod transform;

pub use camera::{is_valid_depth, DepthFrame, Intrinsics};
pub use chunk::ChunkPlan;
pub use cloud::PointCloud;
pub use mask::BinaryMask;
pub use transform::{apply_sim3, axis_angle, camera_center, compose_sim3_pose, Pose, Sim3};
