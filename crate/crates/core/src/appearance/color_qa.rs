//! Synthetic color questions generated from instance masks.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{nearest_named_color, NamedColor};
use crate::scene::{InstanceAnnotation, Scene};

/// A runner-up color is kept when it has at least this fraction of the
/// winner's votes.
pub const RUNNER_UP_FRACTION: f64 = 0.3;

/// Classes never asked about.
pub const EXCLUDED_CLASSES: [&str; 3] = ["wall", "floor", "ceiling"];

pub const COLOR_ANSWER_SEPARATOR: &str = " and ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorQaRecord {
    pub scene_id: String,
    pub question: String,
    /// One or two color names joined with `" and "`.
    pub answer: String,
    pub instance_ids: Vec<u32>,
}

/// Votes per color name over the given points.
pub fn color_histogram(rgbs: impl IntoIterator<Item = [u8; 3]>) -> HashMap<&'static str, usize> {
    let mut h = HashMap::new();
    for rgb in rgbs {
        *h.entry(nearest_named_color(rgb).name).or_insert(0) += 1;
    }
    h
}

/// Histogram entries ordered by count descending, then name.
fn ranked(hist: &HashMap<&'static str, usize>) -> Vec<(&'static str, usize)> {
    let mut v: Vec<_> = hist.iter().map(|(k, v)| (*k, *v)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v
}

fn instance_histogram(scene: &Scene, instance: &InstanceAnnotation) -> HashMap<&'static str, usize> {
    color_histogram(instance.point_indices.iter().map(|&i| scene.points()[i].rgb()))
}

/// One or two color names for an object: the most voted color, plus the
/// runner-up when it reaches [`RUNNER_UP_FRACTION`] of the winner's votes.
pub fn vote_object_colors(scene: &Scene, instance: &InstanceAnnotation) -> Vec<NamedColor> {
    vote_from_histogram(&instance_histogram(scene, instance))
}

fn vote_from_histogram(hist: &HashMap<&'static str, usize>) -> Vec<NamedColor> {
    let r = ranked(hist);
    assert!(!r.is_empty(), "voting needs at least one point");
    let mut out = vec![super::color_by_name(r[0].0).unwrap()];
    if let Some(&(name, count)) = r.get(1) {
        if count as f64 >= RUNNER_UP_FRACTION * r[0].1 as f64 {
            out.push(super::color_by_name(name).unwrap());
        }
    }
    out
}

pub fn join_colors(names: &[&str]) -> String {
    names.join(COLOR_ANSWER_SEPARATOR)
}

fn is_excluded(class: &str) -> bool {
    EXCLUDED_CLASSES.contains(&class.trim().to_lowercase().as_str())
}

/// Color questions for every annotated class except walls, floors and
/// ceilings, in class-name order.
///
/// A class with one instance gets `What color is the <class>?` answered by
/// that instance's vote. A class with several instances gets
/// `What color are the <class>?`; its answer is the union of the instances'
/// voted names, cut to the two with the most combined votes.
pub fn generate_color_qa(scene: &Scene) -> Vec<ColorQaRecord> {
    let Some(instances) = scene.instances() else {
        return Vec::new();
    };
    let mut by_class: BTreeMap<&str, Vec<&InstanceAnnotation>> = BTreeMap::new();
    for inst in instances {
        if !is_excluded(&inst.class_name) {
            by_class.entry(inst.class_name.as_str()).or_default().push(inst);
        }
    }
    let mut out = Vec::new();
    for (class, members) in by_class {
        let ids: Vec<u32> = members.iter().map(|i| i.instance_id).collect();
        let (question, names) = if members.len() == 1 {
            let names: Vec<&str> = vote_object_colors(scene, members[0]).iter().map(|c| c.name).collect();
            (format!("What color is the {class}?"), names)
        } else {
            let mut combined: HashMap<&'static str, usize> = HashMap::new();
            let mut union: Vec<&'static str> = Vec::new();
            for inst in &members {
                let hist = instance_histogram(scene, inst);
                for c in vote_from_histogram(&hist) {
                    if !union.contains(&c.name) {
                        union.push(c.name);
                    }
                }
                for (k, v) in hist {
                    *combined.entry(k).or_insert(0) += v;
                }
            }
            union.sort_by(|a, b| combined[b].cmp(&combined[a]).then(a.cmp(b)));
            union.truncate(2);
            (format!("What color are the {class}?"), union)
        };
        out.push(ColorQaRecord {
            scene_id: scene.scene_id().to_string(),
            question,
            answer: join_colors(&names),
            instance_ids: ids,
        });
    }
    out
}
