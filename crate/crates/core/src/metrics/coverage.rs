use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_valid_depth, BinaryMask, DepthFrame};

/// Valid-depth fractions of one frame, overall and per region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub d_all: f64,
    /// Absent when the dynamic region is empty.
    pub d_dyn: Option<f64>,
    /// Absent when the static region is empty.
    pub d_static: Option<f64>,
    pub valid: usize,
    pub valid_dyn: usize,
    pub valid_static: usize,
    pub area_dyn: usize,
    pub area_static: usize,
}

pub fn depth_coverage(depth: &DepthFrame, dynamic: &BinaryMask) -> Result<Coverage> {
    if dynamic.dims() != (depth.width(), depth.height()) {
        return Err(Error::Consistency(format!(
            "frame {}: evaluation mask is {}x{}, depth is {}x{}",
            depth.frame_id(),
            dynamic.width(),
            dynamic.height(),
            depth.width(),
            depth.height()
        )));
    }
    let (mut valid_dyn, mut valid_static, mut area_dyn) = (0, 0, 0);
    for (&z, &d) in depth.values().iter().zip(dynamic.bits()) {
        let ok = is_valid_depth(z);
        if d {
            area_dyn += 1;
            valid_dyn += ok as usize;
        } else {
            valid_static += ok as usize;
        }
    }
    let total = depth.values().len();
    let area_static = total - area_dyn;
    let frac = |n: usize, area: usize| (area > 0).then(|| n as f64 / area as f64);
    Ok(Coverage {
        d_all: (valid_dyn + valid_static) as f64 / total as f64,
        d_dyn: frac(valid_dyn, area_dyn),
        d_static: frac(valid_static, area_static),
        valid: valid_dyn + valid_static,
        valid_dyn,
        valid_static,
        area_dyn,
        area_static,
    })
}

/// Frame-averaged coverage; each region averages only over frames where it is defined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub d_all: Option<f64>,
    pub d_dyn: Option<f64>,
    pub d_static: Option<f64>,
    /// Mean fraction of the frame covered by the dynamic region.
    pub mask_coverage: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize_coverage(frames: &[Coverage]) -> CoverageSummary {
    CoverageSummary {
        d_all: mean(frames.iter().map(|c| c.d_all)),
        d_dyn: mean(frames.iter().filter_map(|c| c.d_dyn)),
        d_static: mean(frames.iter().filter_map(|c| c.d_static)),
        mask_coverage: mean(
            frames
                .iter()
                .map(|c| c.area_dyn as f64 / (c.area_dyn + c.area_static) as f64),
        ),
    }
}
