use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::model::transform::Sim3;

/// Point set in scene units, optionally tagged with the chunk each point came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    chunk_ids: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self {
            points,
            chunk_ids: None,
        })
    }

    pub fn with_chunk_ids(points: Vec<Vector3<f64>>, chunk_ids: Vec<u32>) -> Result<Self> {
        check_finite(&points)?;
        if chunk_ids.len() != points.len() {
            return Err(Error::Consistency(format!(
                "{} chunk ids for {} points",
                chunk_ids.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            chunk_ids: Some(chunk_ids),
        })
    }

    pub(crate) fn from_raw(points: Vec<Vector3<f64>>, chunk_ids: Option<Vec<u32>>) -> Self {
        Self { points, chunk_ids }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn chunk_ids(&self) -> Option<&[u32]> {
        self.chunk_ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, s: &Sim3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| s.apply(p)).collect(),
            chunk_ids: self.chunk_ids.clone(),
        }
    }

    /// Tags every point with `chunk`.
    pub fn tagged(mut self, chunk: u32) -> PointCloud {
        self.chunk_ids = Some(vec![chunk; self.points.len()]);
        self
    }

    /// Keeps the points for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(&Vector3<f64>) -> bool) {
        match &mut self.chunk_ids {
            None => self.points.retain(|p| keep(p)),
            Some(ids) => {
                let mut new_points = Vec::with_capacity(self.points.len());
                let mut new_ids = Vec::with_capacity(ids.len());
                for (p, id) in self.points.iter().zip(ids.iter()) {
                    if keep(p) {
                        new_points.push(*p);
                        new_ids.push(*id);
                    }
                }
                self.points = new_points;
                *ids = new_ids;
            }
        }
    }

    pub fn into_points(self) -> Vec<Vector3<f64>> {
        self.points
    }
}

fn check_finite(points: &[Vector3<f64>]) -> Result<()> {
    match points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        Some(i) => Err(Error::Validation(format!("point {i} has non-finite coordinates"))),
        None => Ok(()),
    }
}
