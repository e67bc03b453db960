//! Per-object and global appearance features, color naming, and the
//! synthetic color-QA corpus.

mod color;
mod color_qa;

pub use color::{color_by_name, is_color_name, nearest_named_color, NamedColor, CSS21_COLORS};
pub use color_qa::{
    color_histogram, generate_color_qa, join_colors, vote_object_colors, ColorQaRecord, COLOR_ANSWER_SEPARATOR,
    EXCLUDED_CLASSES, RUNNER_UP_FRACTION,
};

use crate::encoder::PointSetEncoder;
use crate::geometry::ObjectProposal;
use crate::nn::{ParamStore, Tensor};
use crate::scene::Scene;

/// Width of the per-point appearance input.
pub const APPEARANCE_INPUT_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceFeature {
    /// One vector per proposal, in proposal order.
    pub per_object: Vec<Vec<f64>>,
    /// Mean over every point of the scene.
    pub global_feature: Vec<f64>,
}

/// `N x 6` encoder input: coordinates scaled into the unit scan box, then
/// colors in `[0, 1]`.
pub fn appearance_inputs(scene: &Scene) -> Tensor {
    let ext = scene.extents();
    let mut t = Tensor::zeros(scene.len(), APPEARANCE_INPUT_DIM);
    for (i, p) in scene.points().iter().enumerate() {
        let xyz = p.xyz();
        let rgb = p.rgb_unit();
        let row = t.row_mut(i);
        for a in 0..3 {
            row[a] = (xyz[a] - ext.origin[a]) / ext.span[a];
            row[3 + a] = rgb[a];
        }
    }
    t
}

/// Column-wise max over the selected rows.
pub fn max_pool_rows(features: &Tensor, rows: &[usize]) -> Vec<f64> {
    assert!(!rows.is_empty(), "max pooling needs at least one row");
    let mut out = features.row(rows[0]).to_vec();
    for &r in &rows[1..] {
        for (o, v) in out.iter_mut().zip(features.row(r)) {
            if *v > *o {
                *o = *v;
            }
        }
    }
    out
}

/// Column-wise mean over all rows.
pub fn mean_pool(features: &Tensor) -> Vec<f64> {
    let mut out = vec![0.0; features.cols()];
    for r in 0..features.rows() {
        for (o, v) in out.iter_mut().zip(features.row(r)) {
            *o += v;
        }
    }
    let n = features.rows() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Runs the encoder once over every point, then pools per proposal (max)
/// and over the whole scene (mean).
pub fn appearance_features(
    scene: &Scene,
    proposals: &[ObjectProposal],
    encoder: &PointSetEncoder,
    params: &ParamStore,
) -> AppearanceFeature {
    let per_point = encoder.per_point_values(params, appearance_inputs(scene));
    AppearanceFeature {
        per_object: proposals.iter().map(|p| max_pool_rows(&per_point, &p.point_indices)).collect(),
        global_feature: mean_pool(&per_point),
    }
}
