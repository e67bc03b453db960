use std::cmp::Ordering;

use super::{iou_3d, ObjectProposal};
use crate::error::{Error, Result};

/// Canonical proposal order: score descending, then box volume descending,
/// then box center ascending lexicographically.
pub fn proposal_order(a: &ObjectProposal, b: &ObjectProposal) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.bbox.volume().total_cmp(&a.bbox.volume()))
        .then_with(|| {
            let (ca, cb) = (a.bbox.center(), b.bbox.center());
            ca[0]
                .total_cmp(&cb[0])
                .then(ca[1].total_cmp(&cb[1]))
                .then(ca[2].total_cmp(&cb[2]))
        })
}

/// Greedy non-maximum suppression. A proposal is dropped when its IoU with
/// an already kept proposal exceeds `iou_threshold`. Survivors come back in
/// [`proposal_order`].
pub fn nms_3d(mut proposals: Vec<ObjectProposal>, iou_threshold: f64) -> Result<Vec<ObjectProposal>> {
    if !(0.0..=1.0).contains(&iou_threshold) {
        return Err(Error::Parameter(format!(
            "IoU threshold {iou_threshold} outside [0, 1]"
        )));
    }
    proposals.sort_by(proposal_order);
    let mut kept: Vec<ObjectProposal> = Vec::with_capacity(proposals.len());
    for p in proposals {
        if kept.iter().all(|k| iou_3d(&k.bbox, &p.bbox) <= iou_threshold) {
            kept.push(p);
        }
    }
    Ok(kept)
}
