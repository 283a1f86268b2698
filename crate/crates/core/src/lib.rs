pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod prior;
pub mod sequence;
pub mod stitch;
pub mod synth;
pub mod token;

pub use error::{Error, ErrorClass, Result};
