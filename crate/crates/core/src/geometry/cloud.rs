use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|‖n‖ - 1|` for stored normals.
pub const UNIT_NORMAL_TOL: f64 = 1e-6;

/// Per-point feature tag carried from sharp mesh features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FeatureLabel {
    #[default]
    Regular,
    Edge,
    Corner,
}

impl FeatureLabel {
    pub fn code(self) -> u8 {
        match self {
            FeatureLabel::Regular => 0,
            FeatureLabel::Edge => 1,
            FeatureLabel::Corner => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureLabel::Regular),
            1 => Some(FeatureLabel::Edge),
            2 => Some(FeatureLabel::Corner),
            _ => None,
        }
    }
}

/// A set of 3D positions with optional per-point attributes.
///
/// Normals are stored per point as `Option` so that a cloud can mix oriented
/// points (inherited from priors) and unoriented raw scan points. Every
/// attribute channel that is present has exactly one entry per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Option<Vector3<f64>>>>,
    labels: Option<Vec<FeatureLabel>>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            normals: None,
            labels: None,
            weights: None,
        }
    }

    /// Attaches one normal per point. Every normal must be unit length.
    pub fn with_normals(self, normals: Vec<Vector3<f64>>) -> Result<Self> {
        self.with_optional_normals(normals.into_iter().map(Some).collect())
    }

    /// Attaches normals where some points may be unoriented (`None`).
    pub fn with_optional_normals(mut self, normals: Vec<Option<Vector3<f64>>>) -> Result<Self> {
        self.check_len("normals", normals.len())?;
        for (i, n) in normals.iter().enumerate() {
            if let Some(n) = n {
                if !n.iter().all(|c| c.is_finite()) || (n.norm() - 1.0).abs() > UNIT_NORMAL_TOL {
                    return Err(Error::InvalidCloud(format!(
                        "normal {i} has norm {} (expected 1)",
                        n.norm()
                    )));
                }
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<FeatureLabel>) -> Result<Self> {
        self.check_len("labels", labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.check_len("weights", weights.len())?;
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "weight {i} is {} (weights must be positive)",
                weights[i]
            )));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.points.len() {
            return Err(Error::InvalidCloud(format!(
                "{what} has {len} entries for {} points",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Option<Vector3<f64>>]> {
        self.normals.as_deref()
    }

    pub fn labels(&self) -> Option<&[FeatureLabel]> {
        self.labels.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn normal(&self, i: usize) -> Option<Vector3<f64>> {
        self.normals.as_ref().and_then(|n| n[i])
    }

    pub fn label(&self, i: usize) -> FeatureLabel {
        self.labels.as_ref().map_or(FeatureLabel::Regular, |l| l[i])
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn oriented_count(&self) -> usize {
        self.normals
            .as_ref()
            .map_or(0, |n| n.iter().filter(|n| n.is_some()).count())
    }

    /// Copies out the points at `indices`, attributes included.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }

    /// Same cloud with positions replaced; attributes are kept.
    pub fn with_points(&self, points: Vec<Point3<f64>>) -> Result<PointCloud> {
        self.check_len("points", points.len())?;
        Ok(PointCloud {
            points,
            normals: self.normals.clone(),
            labels: self.labels.clone(),
            weights: self.weights.clone(),
        })
    }

    pub fn without_weights(mut self) -> PointCloud {
        self.weights = None;
        self
    }

    /// Weights rescaled so that they average to one (unit weights when absent).
    pub fn normalized_weights(&self) -> Vec<f64> {
        match &self.weights {
            None => vec![1.0; self.len()],
            Some(w) => {
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                w.iter().map(|x| x / mean).collect()
            }
        }
    }

    pub fn bounding_box(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        bounding_box(&self.points)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        self.bounding_box().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }

    /// Concatenates clouds. A channel is present in the output if it is
    /// present in any input; missing entries become unoriented normals,
    /// `Regular` labels and unit weights.
    pub fn concat(parts: &[&PointCloud]) -> PointCloud {
        let any_normals = parts.iter().any(|p| p.normals.is_some());
        let any_labels = parts.iter().any(|p| p.labels.is_some());
        let any_weights = parts.iter().any(|p| p.weights.is_some());
        let mut out = PointCloud::default();
        let mut normals = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for p in parts {
            out.points.extend_from_slice(&p.points);
            if any_normals {
                match &p.normals {
                    Some(n) => normals.extend_from_slice(n),
                    None => normals.extend(std::iter::repeat_n(None, p.len())),
                }
            }
            if any_labels {
                labels.extend((0..p.len()).map(|i| p.label(i)));
            }
            if any_weights {
                weights.extend((0..p.len()).map(|i| p.weight(i)));
            }
        }
        out.normals = any_normals.then_some(normals);
        out.labels = any_labels.then_some(labels);
        out.weights = any_weights.then_some(weights);
        out
    }
}

pub fn bounding_box(points: &[Point3<f64>]) -> Option<(Point3<f64>, Point3<f64>)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}
