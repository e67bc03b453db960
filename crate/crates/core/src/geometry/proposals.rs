use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{fps, nms_3d, proposal_order, Aabb, FpsStart, ObjectProposal};
use crate::error::{Error, Result};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    /// One proposal per annotated instance.
    GroundTruth,
    /// Farthest-point seeds grown into radius-connected groups, then NMS.
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    pub mode: ProposalMode,
    pub max_k: usize,
    pub iou_threshold: f64,
    /// Grouping radius in meters.
    pub radius: f64,
    /// Number of farthest-point seeds in heuristic mode (capped at N).
    pub seeds: usize,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            mode: ProposalMode::GroundTruth,
            max_k: 32,
            iou_threshold: 0.25,
            radius: 0.3,
            seeds: 128,
        }
    }
}

/// Produces at most `config.max_k` proposals in [`proposal_order`].
pub fn propose_objects(scene: &Scene, config: &ProposalConfig) -> Result<Vec<ObjectProposal>> {
    let mut proposals = match config.mode {
        ProposalMode::GroundTruth => ground_truth(scene)?,
        ProposalMode::Heuristic => heuristic(scene, config)?,
    };
    proposals.sort_by(proposal_order);
    proposals.truncate(config.max_k);
    Ok(proposals)
}

fn ground_truth(scene: &Scene) -> Result<Vec<ObjectProposal>> {
    let instances = scene.instances().ok_or_else(|| {
        Error::Config(format!(
            "ground-truth proposals requested but scene {} has no instance annotations",
            scene.scene_id()
        ))
    })?;
    let xyz = scene.strip_color();
    Ok(instances
        .iter()
        .map(|inst| {
            let bbox = Aabb::from_points(inst.point_indices.iter().map(|&i| &xyz[i]))
                .expect("instances are nonempty");
            ObjectProposal::new(bbox, inst.point_indices.clone(), 1.0)
        })
        .collect())
}

fn heuristic(scene: &Scene, config: &ProposalConfig) -> Result<Vec<ObjectProposal>> {
    if !(config.radius > 0.0) {
        return Err(Error::Parameter(format!("grouping radius must be positive, got {}", config.radius)));
    }
    let xyz = scene.strip_color();
    let component = radius_components(&xyz, config.radius);
    let seeds = fps(&xyz, config.seeds.min(xyz.len()), FpsStart::Lexicographic)?;

    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &c) in component.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    let mut seen = Vec::new();
    let mut proposals = Vec::new();
    for s in seeds {
        let c = component[s];
        if seen.contains(&c) {
            continue;
        }
        seen.push(c);
        let indices = members[&c].clone();
        let bbox = Aabb::from_points(indices.iter().map(|&i| &xyz[i])).expect("component nonempty");
        let score = indices.len() as f64 / xyz.len() as f64;
        proposals.push(ObjectProposal::new(bbox, indices, score));
    }
    nms_3d(proposals, config.iou_threshold)
}

/// Labels points by connected component, where two points are linked when
/// they lie within `radius` of each other. Labels are the smallest point
/// index of each component.
pub fn radius_components(points: &[[f64; 3]], radius: f64) -> Vec<usize> {
    let cell = |p: &[f64; 3]| {
        [
            (p[0] / radius).floor() as i64,
            (p[1] / radius).floor() as i64,
            (p[2] / radius).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let r2 = radius * radius;
    for (i, p) in points.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else { continue };
                    for &j in bucket {
                        if j <= i {
                            continue;
                        }
                        let q = &points[j];
                        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                        if d2 <= r2 {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                                parent[hi] = lo;
                            }
                        }
                    }
                }
            }
        }
    }
    (0..points.len()).map(|i| find(&mut parent, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{InstanceAnnotation, Point};

    fn cube(origin: [f64; 3], side: f64, n: usize, color: [u8; 3]) -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let f = |t: usize| t as f64 / (n - 1) as f64 * side;
                    pts.push(Point::new(origin[0] + f(i), origin[1] + f(j), origin[2] + f(k), color));
                }
            }
        }
        pts
    }

    fn two_cubes() -> Scene {
        let mut pts = cube([0.0; 3], 1.0, 3, [255, 0, 0]);
        pts.extend(cube([5.0, 0.0, 0.0], 2.0, 3, [0, 0, 255]));
        let inst = vec![
            InstanceAnnotation { instance_id: 0, class_name: "box".into(), point_indices: (0..27).collect() },
            InstanceAnnotation { instance_id: 1, class_name: "box".into(), point_indices: (27..54).collect() },
        ];
        Scene::new("cubes", pts, Some(inst)).unwrap()
    }

    #[test]
    fn ground_truth_boxes_match_instances() {
        let s = two_cubes();
        let cfg = ProposalConfig::default();
        let props = propose_objects(&s, &cfg).unwrap();
        assert_eq!(props.len(), 2);
        // Larger volume first under equal scores.
        assert_eq!(props[0].bbox, Aabb::new([5.0, 0.0, 0.0], [7.0, 2.0, 2.0]).unwrap());
        assert_eq!(props[1].bbox, Aabb::new([0.0; 3], [1.0; 3]).unwrap());
        assert!(props.iter().all(|p| p.score == 1.0));
    }

    #[test]
    fn truncation_keeps_the_larger_cube() {
        let s = two_cubes();
        let cfg = ProposalConfig { max_k: 1, ..Default::default() };
        let props = propose_objects(&s, &cfg).unwrap();
        assert_eq!(props.len(), 1);
        assert_eq!(props[0].bbox.volume(), 8.0);
    }

    #[test]
    fn ground_truth_without_annotations_is_config_error() {
        let s = Scene::new("bare", cube([0.0; 3], 1.0, 2, [0, 0, 0]), None).unwrap();
        let err = propose_objects(&s, &ProposalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn heuristic_finds_separate_cubes() {
        let s = two_cubes();
        let cfg = ProposalConfig { mode: ProposalMode::Heuristic, radius: 1.05, ..Default::default() };
        let props = propose_objects(&s, &cfg).unwrap();
        assert_eq!(props.len(), 2);
        assert_eq!(props[0].point_indices.len(), 27);
    }

    #[test]
    fn components_chain_through_neighbors() {
        let pts = [[0.0, 0.0, 0.0], [0.25, 0.0, 0.0], [0.5, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert_eq!(radius_components(&pts, 0.3), vec![0, 0, 0, 3]);
    }
}
