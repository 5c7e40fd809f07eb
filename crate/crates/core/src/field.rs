//! Ground-truth sensory fields over graph vertices.
//!
//! Fields are built from a Gaussian mixture or a kernel density estimate over
//! a planar point cloud, then mapped onto `[PHI_FLOOR, 1]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedGraph};

/// Lower clamp keeping every field value strictly positive.
pub const PHI_FLOOR: f64 = 1e-6;

/// Strictly positive per-vertex demand.
#[derive(Debug, Clone, PartialEq)]
pub struct SensoryField(Vec<f64>);

impl SensoryField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidField("field is empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidField(format!("value {v} at vertex {i} is not strictly positive")));
        }
        Ok(SensoryField(values))
    }

    /// Clamps every entry to at least `floor`; used to turn a posterior mean into a field estimate.
    pub fn clamped(values: &[f64], floor: f64) -> Self {
        SensoryField(
            values
                .iter()
                .map(|&v| if v.is_finite() { v.max(floor) } else { floor })
                .collect(),
        )
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        SensoryField::new(vec![value; n])
    }

    #[inline]
    pub fn at(&self, v: VertexId) -> f64 {
        self.0[v.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Pointwise scaled copy; `factor` must be positive.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        SensoryField::new(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn write_csv(&self, g: &WeightedGraph, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["vertex", "x", "y", "phi"])?;
        for (i, phi) in self.0.iter().enumerate() {
            let p = g.position(VertexId(i));
            w.write_record(&[i.to_string(), format!("{:?}", p[0]), format!("{:?}", p[1]), format!("{phi:?}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a `vertex,x,y,phi` file; rows may come in any order but must cover every vertex once.
    pub fn read_csv(path: &Path, num_vertices: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            vertex: usize,
            phi: f64,
        }
        let mut values = vec![f64::NAN; num_vertices];
        let mut reader = csv::Reader::from_path(path)?;
        for row in reader.deserialize() {
            let row: Row = row?;
            if row.vertex >= num_vertices {
                return Err(Error::InvalidField(format!("vertex {} out of range", row.vertex)));
            }
            values[row.vertex] = row.phi;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidField(format!("{}: missing value for vertex {i}", path.display())));
        }
        SensoryField::new(values)
    }
}

/// One isotropic Gaussian bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmComponent {
    pub center: [f64; 2],
    pub scale: f64,
    pub weight: f64,
}

/// Planar event locations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud(pub Vec<[f64; 2]>);

impl PointCloud {
    /// Reads a CSV with header and columns `x, y`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            y: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let mut points = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            points.push([row.x, row.y]);
        }
        Ok(PointCloud(points))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y"])?;
        for p in &self.0 {
            w.write_record(&[format!("{:?}", p[0]), format!("{:?}", p[1])])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Affine map onto `[0, 1]`, then clamp at [`PHI_FLOOR`]. Constant input maps to all ones.
pub fn normalize_field(raw: &[f64]) -> Result<SensoryField> {
    if raw.is_empty() {
        return Err(Error::InvalidField("cannot normalize an empty field".into()));
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidField(format!("non-finite raw value at vertex {i}")));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return SensoryField::new(vec![1.0; raw.len()]);
    }
    SensoryField::new(raw.iter().map(|v| ((v - lo) / range).max(PHI_FLOOR)).collect())
}

fn gaussian_bump(p: [f64; 2], c: [f64; 2], s: f64) -> f64 {
    let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
    (-d2 / (2.0 * s * s)).exp()
}

pub fn gmm_field(g: &WeightedGraph, components: &[GmmComponent]) -> Result<SensoryField> {
    if components.is_empty() {
        return Err(Error::InvalidField("mixture has no components".into()));
    }
    for (k, c) in components.iter().enumerate() {
        if !(c.weight > 0.0 && c.weight.is_finite()) || !(c.scale > 0.0 && c.scale.is_finite()) {
            return Err(Error::InvalidField(format!(
                "component {k} needs positive weight and scale (got {}, {})",
                c.weight, c.scale
            )));
        }
    }
    let raw: Vec<f64> = g
        .positions()
        .iter()
        .map(|&p| components.iter().map(|c| c.weight * gaussian_bump(p, c.center, c.scale)).sum())
        .collect();
    normalize_field(&raw)
}

/// Gaussian kernel density of `points` evaluated at vertex positions.
pub fn kde_field(g: &WeightedGraph, points: &PointCloud, bandwidth: f64) -> Result<SensoryField> {
    if points.0.is_empty() {
        return Err(Error::InvalidField("point cloud is empty".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidField(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let count = points.0.len() as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bandwidth * bandwidth * count);
    let raw: Vec<f64> = g
        .positions()
        .iter()
        .map(|&p| norm * points.0.iter().map(|&q| gaussian_bump(p, q, bandwidth)).sum::<f64>())
        .collect();
    normalize_field(&raw)
}

/// Two-hotspot mixture on the unit square used by the default experiment.
pub fn two_hotspot_components() -> Vec<GmmComponent> {
    vec![
        GmmComponent {
            center: [0.25, 0.3],
            scale: 0.12,
            weight: 1.0,
        },
        GmmComponent {
            center: [0.72, 0.7],
            scale: 0.15,
            weight: 0.8,
        },
    ]
}
