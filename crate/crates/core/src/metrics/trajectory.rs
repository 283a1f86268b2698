use serde::{Deserialize, Serialize};

use crate::model::Sim3;
use crate::stitch::{residual_rmse, OverlapPair};

/// RMSE of `‖c_prev − S(c_cur)‖` over the overlap, in the stitched frame.
pub fn center_residual(pair: &OverlapPair, s: &Sim3) -> f64 {
    residual_rmse(&pair.x, &pair.y, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    pub median: f64,
}

/// Mean and median of per-transition residuals; `None` without transitions.
pub fn residual_stats(residuals: &[f64]) -> Option<ResidualStats> {
    if residuals.is_empty() {
        return None;
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Some(ResidualStats {
        mean: residuals.iter().sum::<f64>() / n as f64,
        median,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    /// Arithmetic mean, the reported `s̄`.
    pub mean: f64,
    pub geometric_mean: f64,
}

/// Mean scale over transitions; `None` without transitions.
pub fn scale_stability(scales: &[f64]) -> Option<ScaleStats> {
    if scales.is_empty() {
        return None;
    }
    let n = scales.len() as f64;
    Some(ScaleStats {
        mean: scales.iter().sum::<f64>() / n,
        geometric_mean: (scales.iter().map(|s| s.ln()).sum::<f64>() / n).exp(),
    })
}
