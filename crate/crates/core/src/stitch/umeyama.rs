use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::Sim3;

/// Relative singular-value floor below which a point set counts as collinear.
pub const DEGENERACY_RATIO: f64 = 1e-9;

/// A fitted transform together with its residual RMSE on the fitted pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub transform: Sim3,
    pub rmse: f64,
}

/// Root-mean-square of `‖y_k − S(x_k)‖` over corresponding rows.
pub fn residual_rmse(x: &[Vector3<f64>], y: &[Vector3<f64>], s: &Sim3) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let sum: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - s.apply(a)).norm_squared())
        .sum();
    (sum / x.len() as f64).sqrt()
}

struct Moments {
    mu_x: Vector3<f64>,
    mu_y: Vector3<f64>,
    var_x: f64,
    cov: Matrix3<f64>,
}

fn moments(x: &[Vector3<f64>], y: &[Vector3<f64>]) -> Result<Moments> {
    if x.len() != y.len() {
        return Err(Error::Consistency(format!(
            "{} source points but {} targets",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientOverlap {
            needed: 3,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mu_x = x.iter().sum::<Vector3<f64>>() / n;
    let mu_y = y.iter().sum::<Vector3<f64>>() / n;
    let mut var_x = 0.0;
    let mut cov = Matrix3::zeros();
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mu_x, b - mu_y);
        var_x += dx.norm_squared();
        cov += dy * dx.transpose();
    }
    Ok(Moments {
        mu_x,
        mu_y,
        var_x: var_x / n,
        cov: cov / n,
    })
}

/// Singular values of the centered source set, largest first.
fn spread(x: &[Vector3<f64>], mu: &Vector3<f64>) -> [f64; 3] {
    let mut scatter = Matrix3::zeros();
    for p in x {
        let d = p - mu;
        scatter += d * d.transpose();
    }
    // eigenvalues of the scatter matrix are the squared singular values
    let mut ev: Vec<f64> = scatter
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// Rotation maximizing `trace(Rᵀ·Σ)` with the reflection fixed, and the
/// matching `trace(D·S)`.
fn best_rotation(cov: &Matrix3<f64>) -> (Matrix3<f64>, f64) {
    let svd = cov.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = Matrix3::from_columns(&order.map(|i| u.column(i).into_owned()));
    let vt = Matrix3::from_rows(&order.map(|i| vt.row(i).into_owned()));
    let d = order.map(|i| svd.singular_values[i]);
    let sign = if u.determinant() * vt.determinant() < 0.0 {
        -1.0
    } else {
        1.0
    };
    let s = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign));
    (u * s * vt, d[0] + d[1] + sign * d[2])
}

/// Least-squares similarity `S` minimizing `Σ‖y_k − S(x_k)‖²`.
///
/// Fails with `InsufficientOverlap` below three pairs and with
/// `DegenerateGeometry` when the source points are (nearly) collinear.
pub fn umeyama(x: &[Vector3<f64>], y: &[Vector3<f64>]) -> Result<Fit> {
    let m = moments(x, y)?;
    let sv = spread(x, &m.mu_x);
    if !(sv[0] > 0.0) || sv[1] <= DEGENERACY_RATIO * sv[0] {
        return Err(Error::DegenerateGeometry(format!(
            "overlap centers are collinear (singular values {:.3e}, {:.3e}, {:.3e})",
            sv[0], sv[1], sv[2]
        )));
    }
    let (rotation, trace_ds) = best_rotation(&m.cov);
    let scale = trace_ds / m.var_x;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "estimated scale {scale} is not positive"
        )));
    }
    let translation = m.mu_y - scale * (rotation * m.mu_x);
    let transform = Sim3::from_parts_unchecked(scale, rotation, translation);
    Ok(Fit {
        transform,
        rmse: residual_rmse(x, y, &transform),
    })
}

/// Rotation and translation fit with the scale held at `scale`.
pub fn rigid_fit(x: &[Vector3<f64>], y: &[Vector3<f64>], scale: f64) -> Result<Fit> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Validation(format!("fixed scale must be positive, got {scale}")));
    }
    let m = moments(x, y)?;
    let (rotation, _) = best_rotation(&m.cov);
    let translation = m.mu_y - scale * (rotation * m.mu_x);
    let transform = Sim3::from_parts_unchecked(scale, rotation, translation);
    Ok(Fit {
        transform,
        rmse: residual_rmse(x, y, &transform),
    })
}
