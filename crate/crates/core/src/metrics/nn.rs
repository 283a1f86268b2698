use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Exact nearest-neighbor index over a fixed point set.
///
/// Stored as an implicit balanced k-d tree: for each index range the middle
/// element splits its range on axis `depth % 3`.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vector3<f64>>,
}

impl KdTree {
    pub fn new(points: &[Vector3<f64>]) -> Self {
        let mut points = points.to_vec();
        build(&mut points, 0);
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point of the set closest to `x`.
    pub fn nearest(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        if self.points.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut best = (f64::INFINITY, 0usize);
        search(&self.points, 0, self.points.len(), 0, x, &mut best);
        Ok(self.points[best.1])
    }

    /// `min_a ‖x − a‖`, identical to a linear scan over the set.
    pub fn distance(&self, x: &Vector3<f64>) -> Result<f64> {
        Ok((x - self.nearest(x)?).norm())
    }
}

fn build(points: &mut [Vector3<f64>], depth: usize) {
    if points.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (left, right) = points.split_at_mut(mid);
    build(left, depth + 1);
    build(&mut right[1..], depth + 1);
}

fn search(
    points: &[Vector3<f64>],
    lo: usize,
    hi: usize,
    depth: usize,
    x: &Vector3<f64>,
    best: &mut (f64, usize),
) {
    if lo >= hi {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let p = &points[mid];
    let d2 = (x - p).norm_squared();
    if d2 < best.0 {
        *best = (d2, mid);
    }
    let axis = depth % 3;
    let diff = x[axis] - p[axis];
    let (near, far) = if diff < 0.0 {
        ((lo, mid), (mid + 1, hi))
    } else {
        ((mid + 1, hi), (lo, mid))
    };
    search(points, near.0, near.1, depth + 1, x, best);
    if diff * diff <= best.0 {
        search(points, far.0, far.1, depth + 1, x, best);
    }
}

/// `d(x, A) = min_{a∈A} ‖x − a‖`.
pub fn nn_distance(x: &Vector3<f64>, set: &[Vector3<f64>]) -> Result<f64> {
    KdTree::new(set).distance(x)
}

/// Mean distance from each point of `from` to its nearest neighbor in `to`.
pub fn mean_nn_distance(from: &[Vector3<f64>], to: &KdTree) -> Result<f64> {
    if from.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut sum = 0.0;
    for x in from {
        sum += to.distance(x)?;
    }
    Ok(sum / from.len() as f64)
}
