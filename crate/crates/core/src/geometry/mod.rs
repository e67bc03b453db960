//! Object proposals and the geometry side of the encoders: box kernels,
//! normalized box descriptors with their sinusoidal encoding, and
//! per-object geometry features.

mod aabb;
mod fps;
mod nms;
mod proposals;
mod spatial;

pub use aabb::{iou_3d, Aabb};
pub use fps::{fps, FpsStart};
pub use nms::{nms_3d, proposal_order};
pub use proposals::{propose_objects, radius_components, ProposalConfig, ProposalMode};
pub use spatial::{positional_encode, spatial_vector, PeCodebook, SpatialVector};

use serde::{Deserialize, Serialize};

use crate::encoder::PointSetEncoder;
use crate::nn::{ParamStore, Tensor};
use crate::scene::Scene;

/// A detected (or annotated) object region.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectProposal {
    pub bbox: Aabb,
    /// Indices of the member points in the source scene.
    pub point_indices: Vec<usize>,
    pub score: f64,
    /// Empty until [`describe_proposals`] fills it.
    pub geometry_feature: Vec<f64>,
    /// Empty until [`describe_proposals`] fills it.
    pub spatial_embedding: Vec<f64>,
}

impl ObjectProposal {
    pub fn new(bbox: Aabb, point_indices: Vec<usize>, score: f64) -> Self {
        ObjectProposal {
            bbox,
            point_indices,
            score,
            geometry_feature: Vec::new(),
            spatial_embedding: Vec::new(),
        }
    }
}

/// Debug record for one proposal, written one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub scene_id: String,
    /// `(x_min, x_max, y_min, y_max, z_min, z_max)`.
    pub bbox: [f64; 6],
    pub score: f64,
    pub indices: Vec<usize>,
}

impl ProposalRecord {
    pub fn new(scene_id: &str, p: &ObjectProposal) -> Self {
        ProposalRecord {
            scene_id: scene_id.to_string(),
            bbox: p.bbox.to_bounds(),
            score: p.score,
            indices: p.point_indices.clone(),
        }
    }
}

/// Points shifted so their centroid sits at the origin.
pub fn centered(points: &[[f64; 3]]) -> Tensor {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    for v in &mut c {
        *v /= n;
    }
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p[0] - c[0], p[1] - c[1], p[2] - c[2]]).collect();
    Tensor::from_rows(&rows, 3)
}

/// Max-pooled encoder features of one object's points, taken on centered
/// coordinates so the result ignores point order and translation.
pub fn geometry_features(points: &[[f64; 3]], encoder: &PointSetEncoder, params: &ParamStore) -> Vec<f64> {
    assert!(!points.is_empty(), "geometry features need at least one point");
    let per_point = encoder.per_point_values(params, centered(points));
    let mut out = per_point.row(0).to_vec();
    for r in 1..per_point.rows() {
        for (o, v) in out.iter_mut().zip(per_point.row(r)) {
            if *v > *o {
                *o = *v;
            }
        }
    }
    out
}

/// Fills `geometry_feature` and `spatial_embedding` of every proposal.
pub fn describe_proposals(
    scene: &Scene,
    proposals: &mut [ObjectProposal],
    encoder: &PointSetEncoder,
    params: &ParamStore,
    codebook: &PeCodebook,
) {
    let xyz = scene.strip_color();
    for p in proposals {
        let pts: Vec<[f64; 3]> = p.point_indices.iter().map(|&i| xyz[i]).collect();
        p.geometry_feature = geometry_features(&pts, encoder, params);
        p.spatial_embedding = positional_encode(&spatial_vector(&p.bbox, scene.extents()), codebook);
    }
}
