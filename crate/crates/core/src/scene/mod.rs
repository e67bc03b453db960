//! Colored point-cloud scenes with optional instance annotations.
//!
//! A [`Scene`] is immutable once built. Colors are kept as 0-255 integers;
//! conversion to `[0, 1]` happens at the encoder boundary.

mod ply;

pub use ply::{export_ply, load_ply, parse_ply};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Span substituted for an axis on which every point has the same coordinate.
pub const DEGENERATE_SPAN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, rgb: [u8; 3]) -> Self {
        Point {
            x,
            y,
            z,
            r: rgb[0],
            g: rgb[1],
            b: rgb[2],
        }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn rgb(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    /// Colors mapped to `[0, 1]`.
    pub fn rgb_unit(&self) -> [f64; 3] {
        [
            f64::from(self.r) / 255.0,
            f64::from(self.g) / 255.0,
            f64::from(self.b) / 255.0,
        ]
    }
}

/// Per-axis scene span and minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneExtents {
    /// Span along x, y and z in meters, always > 0.
    pub span: [f64; 3],
    /// Per-axis minima.
    pub origin: [f64; 3],
    /// Set for axes whose true span was zero and got [`DEGENERATE_SPAN`].
    pub degenerate: [bool; 3],
}

impl SceneExtents {
    pub fn x(&self) -> f64 {
        self.span[0]
    }
    pub fn y(&self) -> f64 {
        self.span[1]
    }
    pub fn z(&self) -> f64 {
        self.span[2]
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Computes per-axis minima and spans. Panics on an empty slice; every
/// [`Scene`] holds at least one point.
pub fn compute_extents(points: &[[f64; 3]]) -> SceneExtents {
    assert!(!points.is_empty(), "compute_extents needs at least one point");
    let mut lo = points[0];
    let mut hi = points[0];
    for p in &points[1..] {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut span = [0.0; 3];
    let mut degenerate = [false; 3];
    for a in 0..3 {
        let s = hi[a] - lo[a];
        if s > 0.0 {
            span[a] = s;
        } else {
            span[a] = DEGENERATE_SPAN;
            degenerate[a] = true;
        }
    }
    SceneExtents {
        span,
        origin: lo,
        degenerate,
    }
}

/// Ground-truth object mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAnnotation {
    pub instance_id: u32,
    pub class_name: String,
    /// Sorted, unique indices into [`Scene::points`].
    pub point_indices: Vec<usize>,
}

/// Where the stored 0-255 colors came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ColorSource {
    /// Integer channels read as-is.
    #[default]
    Integer,
    /// Channels were given in `[0, 1]` and quantized with `round(255 c)`.
    Requantized,
    /// The input had no color properties; all channels are 0.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    scene_id: String,
    points: Vec<Point>,
    extents: SceneExtents,
    instances: Option<Vec<InstanceAnnotation>>,
    color_source: ColorSource,
}

impl Scene {
    /// Validates and builds a scene.
    ///
    /// Instances must have nonempty, sorted, unique, in-range indices and
    /// must not share points with each other.
    pub fn new(
        scene_id: impl Into<String>,
        points: Vec<Point>,
        instances: Option<Vec<InstanceAnnotation>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("scene has no points (N >= 1 required)".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::Validation(format!(
                    "point {i} has a non-finite coordinate ({}, {}, {})",
                    p.x, p.y, p.z
                )));
            }
        }
        if let Some(instances) = &instances {
            validate_instances(instances, points.len())?;
        }
        let coords: Vec<[f64; 3]> = points.iter().map(Point::xyz).collect();
        let extents = compute_extents(&coords);
        Ok(Scene {
            scene_id: scene_id.into(),
            points,
            extents,
            instances,
            color_source: ColorSource::Integer,
        })
    }

    pub fn with_color_source(mut self, source: ColorSource) -> Self {
        self.color_source = source;
        self
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extents(&self) -> &SceneExtents {
        &self.extents
    }

    pub fn instances(&self) -> Option<&[InstanceAnnotation]> {
        self.instances.as_deref()
    }

    pub fn color_source(&self) -> ColorSource {
        self.color_source
    }

    /// The coordinate-only view of the scene, in point order.
    pub fn strip_color(&self) -> Vec<[f64; 3]> {
        strip_color(self)
    }

    pub fn points_at(&self, indices: &[usize]) -> Vec<Point> {
        indices.iter().map(|&i| self.points[i]).collect()
    }
}

pub fn strip_color(scene: &Scene) -> Vec<[f64; 3]> {
    scene.points.iter().map(Point::xyz).collect()
}

fn validate_instances(instances: &[InstanceAnnotation], n: usize) -> Result<()> {
    let mut ids = HashSet::new();
    let mut owner = vec![None; n];
    for inst in instances {
        if !ids.insert(inst.instance_id) {
            return Err(Error::Validation(format!(
                "duplicate instance id {}",
                inst.instance_id
            )));
        }
        if inst.point_indices.is_empty() {
            return Err(Error::Validation(format!(
                "instance {} has no points",
                inst.instance_id
            )));
        }
        if inst.class_name.trim().is_empty() || inst.class_name.contains('\n') {
            return Err(Error::Validation(format!(
                "instance {} has an invalid class name {:?}",
                inst.instance_id, inst.class_name
            )));
        }
        for w in inst.point_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Validation(format!(
                    "instance {} indices are not sorted and unique",
                    inst.instance_id
                )));
            }
        }
        for &i in &inst.point_indices {
            if i >= n {
                return Err(Error::Validation(format!(
                    "instance {} references point {i} but the scene has {n} points",
                    inst.instance_id
                )));
            }
            if let Some(other) = owner[i].replace(inst.instance_id) {
                return Err(Error::Validation(format!(
                    "point {i} belongs to instances {other} and {}",
                    inst.instance_id
                )));
            }
        }
    }
    Ok(())
}
