//! Normalized box descriptors and their sinusoidal encoding.

use serde::{Deserialize, Serialize};

use super::Aabb;
use crate::error::{Error, Result};
use crate::scene::SceneExtents;

/// Twelve scan-normalized box components, in order:
/// `x_c, y_c, z_c, dx, dy, dz, x_min, x_max, y_min, y_max, z_min, z_max`,
/// each divided by the scene span of its axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialVector(pub [f64; 12]);

impl SpatialVector {
    pub const ZERO: SpatialVector = SpatialVector([0.0; 12]);

    pub fn components(&self) -> &[f64; 12] {
        &self.0
    }
}

/// Box coordinates are shifted by the scene origin before being divided by
/// the scene spans, so every component of a box inside the scene lies in
/// `[0, 1]`.
pub fn spatial_vector(bbox: &Aabb, extents: &SceneExtents) -> SpatialVector {
    let o = extents.origin;
    let s = extents.span;
    let lo = [bbox.min[0] - o[0], bbox.min[1] - o[1], bbox.min[2] - o[2]];
    let hi = [bbox.max[0] - o[0], bbox.max[1] - o[1], bbox.max[2] - o[2]];
    let mut v = [0.0; 12];
    for a in 0..3 {
        v[a] = (lo[a] + hi[a]) / 2.0 / s[a];
        v[3 + a] = (hi[a] - lo[a]) / s[a];
        v[6 + 2 * a] = lo[a] / s[a];
        v[7 + 2 * a] = hi[a] / s[a];
    }
    SpatialVector(v)
}

/// Parameters of the sinusoidal encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeCodebook {
    d_model: usize,
    base: f64,
}

impl PeCodebook {
    pub const DEFAULT_BASE: f64 = 1000.0;

    pub fn new(d_model: usize) -> Result<Self> {
        Self::with_base(d_model, Self::DEFAULT_BASE)
    }

    pub fn with_base(d_model: usize, base: f64) -> Result<Self> {
        if d_model == 0 || d_model % 2 != 0 {
            return Err(Error::Parameter(format!("d_model must be even and positive, got {d_model}")));
        }
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::Parameter(format!("encoding base must be positive, got {base}")));
        }
        Ok(PeCodebook { d_model, base })
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    /// Output length of [`positional_encode`].
    pub fn output_len(&self) -> usize {
        12 * self.d_model
    }
}

/// Encodes each component `v_j` with `d_model` interleaved sin/cos slots:
/// slot `j*d_model + 2i` holds `sin(v_j / base^(2i/d_model))` and slot
/// `j*d_model + 2i + 1` the matching cosine.
pub fn positional_encode(v: &SpatialVector, codebook: &PeCodebook) -> Vec<f64> {
    let d = codebook.d_model;
    let divisors: Vec<f64> = (0..d / 2)
        .map(|i| codebook.base.powf(2.0 * i as f64 / d as f64))
        .collect();
    let mut out = Vec::with_capacity(12 * d);
    for &x in &v.0 {
        for div in &divisors {
            let (s, c) = (x / div).sin_cos();
            out.push(s);
            out.push(c);
        }
    }
    out
}
