//! Synthetic benchmark: rooms of colored boxes on a floor slab, with
//! template questions whose answers follow from the scene description.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::appearance::{color_by_name, generate_color_qa, CSS21_COLORS};
use crate::dataset::{AnswerSubmission, Confidence, QaRecord, Split};
use crate::error::{Error, Result};
use crate::fusion::{Ablation, FusionConfig};
use crate::scene::{InstanceAnnotation, Point, Scene};

use super::TrainConfig;

/// Simulated annotators per generated question.
pub const ANNOTATORS: usize = 5;

/// Free space kept between object footprints, in meters.
pub const PLACEMENT_MARGIN: f64 = 0.1;

const FLOOR_THICKNESS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Box,
    /// Flat box of fixed thickness, used for the floor.
    Slab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShape {
    pub name: String,
    /// Nominal x/y size; each instance is jittered by up to 10%.
    pub footprint: [f64; 2],
    /// Height is drawn uniformly from this range.
    pub height: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    /// Room size along x and y.
    pub room: [f64; 2],
    pub min_objects: usize,
    pub max_objects: usize,
    pub classes: Vec<ClassShape>,
    /// Object colors, all names from the CSS 2.1 table.
    pub palette: Vec<String>,
    pub points_per_object: usize,
    pub floor_points: usize,
    /// Placement attempts per object before giving up.
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    /// Four furniture classes with distinct footprints and a shared height
    /// range, so height comparisons cannot be read off the class names.
    fn default() -> Self {
        let class = |name: &str, fx: f64, fy: f64| ClassShape {
            name: name.to_string(),
            footprint: [fx, fy],
            height: [0.3, 1.8],
        };
        SyntheticSceneSpec {
            room: [6.0, 6.0],
            min_objects: 2,
            max_objects: 4,
            classes: vec![
                class("chair", 0.5, 0.5),
                class("table", 1.4, 0.9),
                class("cabinet", 0.9, 0.35),
                class("sofa", 1.9, 0.8),
            ],
            palette: CSS21_COLORS.iter().map(|c| c.name.to_string()).collect(),
            points_per_object: 48,
            floor_points: 96,
            max_retries: 200,
            seed: 7,
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.classes.is_empty() {
            return bad("benchmark spec has no object classes".into());
        }
        if self.palette.is_empty() {
            return bad("benchmark palette is empty".into());
        }
        if let Some(c) = self.palette.iter().find(|c| color_by_name(c).is_none()) {
            return bad(format!("palette color {c:?} is not a CSS 2.1 color name"));
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return bad(format!("need 1 <= min_objects <= max_objects, got {} and {}", self.min_objects, self.max_objects));
        }
        if self.points_per_object < 8 || self.floor_points < 8 {
            return bad("objects and floor need at least 8 points (their corners)".into());
        }
        if !(self.room[0] > 0.0 && self.room[1] > 0.0) {
            return bad(format!("room extents must be positive, got {:?}", self.room));
        }
        for c in &self.classes {
            let fits = c.footprint[0] * 1.1 < self.room[0] && c.footprint[1] * 1.1 < self.room[1];
            let ok_h = c.height[0] > 0.0 && c.height[0] <= c.height[1];
            if c.name.is_empty() || !fits || !ok_h || c.footprint.iter().any(|f| !(*f > 0.0)) {
                return bad(format!("class {:?} has an invalid or oversized shape", c.name));
            }
        }
        Ok(())
    }
}

/// One placed object. The floor is object 0 with class `floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub instance_id: u32,
    pub class_name: String,
    pub color: String,
    pub primitive: Primitive,
    /// Minimum corner.
    pub min: [f64; 3],
    pub size: [f64; 3],
}

impl ObjectSpec {
    pub fn height(&self) -> f64 {
        self.size[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: String,
    pub split: Split,
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    /// Non-floor objects.
    pub fn furniture(&self) -> impl Iterator<Item = &ObjectSpec> {
        self.objects.iter().filter(|o| o.primitive == Primitive::Box)
    }

    pub fn count(&self, class: &str) -> usize {
        self.furniture().filter(|o| o.class_name == class).count()
    }
}

/// Question families produced by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionTemplate {
    Color,
    Taller,
    Count,
    Existence,
    /// "what is the tallest object", answered with a class name.
    Tallest,
    /// "what color is the tallest object".
    TallestColor,
}

impl QuestionTemplate {
    pub const ALL: [QuestionTemplate; 6] = [
        QuestionTemplate::Color,
        QuestionTemplate::Taller,
        QuestionTemplate::Count,
        QuestionTemplate::Existence,
        QuestionTemplate::Tallest,
        QuestionTemplate::TallestColor,
    ];

    /// Templates whose answer depends on object sizes.
    pub fn is_spatial(self) -> bool {
        matches!(self, QuestionTemplate::Taller | QuestionTemplate::Tallest)
    }

    /// Recognizes generated question text.
    pub fn detect(question: &str) -> Option<Self> {
        let q = question.to_lowercase();
        if q == "what color is the tallest object" {
            Some(QuestionTemplate::TallestColor)
        } else if q == "what is the tallest object" {
            Some(QuestionTemplate::Tallest)
        } else if q.starts_with("what color") {
            Some(QuestionTemplate::Color)
        } else if q.starts_with("is the ") && q.contains(" taller than the ") {
            Some(QuestionTemplate::Taller)
        } else if q.starts_with("how many ") {
            Some(QuestionTemplate::Count)
        } else if q.starts_with("is there ") {
            Some(QuestionTemplate::Existence)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub specs: Vec<SceneSpec>,
    pub scenes: Vec<Scene>,
    pub records: Vec<QaRecord>,
}

impl Benchmark {
    pub fn split_of(&self, scene_id: &str) -> Option<Split> {
        self.specs.iter().find(|s| s.scene_id == scene_id).map(|s| s.split)
    }
}

/// Plural used in counting questions.
pub fn plural(class: &str) -> String {
    if class.ends_with('s') || class.ends_with('x') || class.ends_with("ch") || class.ends_with("sh") {
        format!("{class}es")
    } else {
        format!("{class}s")
    }
}

/// Scene-level 70/10/20 split of `n` scenes, shuffled by `rng`.
fn assign_splits(n: usize, rng: &mut ChaCha8Rng) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_train = (n as f64 * 0.7).round() as usize;
    let n_val = (n as f64 * 0.1).round() as usize;
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    splits
}

fn overlaps(a: &ObjectSpec, min: [f64; 2], size: [f64; 2]) -> bool {
    let m = PLACEMENT_MARGIN;
    (0..2).all(|k| a.min[k] < min[k] + size[k] + m && min[k] < a.min[k] + a.size[k] + m)
}

/// Draws a scene layout: a floor slab plus non-overlapping boxes.
pub fn sample_scene_spec(
    spec: &SyntheticSceneSpec,
    scene_id: &str,
    split: Split,
    rng: &mut ChaCha8Rng,
) -> Result<SceneSpec> {
    let pick_color = |rng: &mut ChaCha8Rng| spec.palette[rng.gen_range(0..spec.palette.len())].clone();
    let mut objects = vec![ObjectSpec {
        instance_id: 0,
        class_name: "floor".into(),
        color: pick_color(rng),
        primitive: Primitive::Slab,
        min: [0.0, 0.0, -FLOOR_THICKNESS],
        size: [spec.room[0], spec.room[1], FLOOR_THICKNESS],
    }];
    let n = rng.gen_range(spec.min_objects..=spec.max_objects);
    for id in 1..=n as u32 {
        let class = &spec.classes[rng.gen_range(0..spec.classes.len())];
        let size = [
            class.footprint[0] * rng.gen_range(0.9..1.1),
            class.footprint[1] * rng.gen_range(0.9..1.1),
            rng.gen_range(class.height[0]..=class.height[1]),
        ];
        let mut placed = None;
        for _ in 0..spec.max_retries {
            let min = [rng.gen_range(0.0..spec.room[0] - size[0]), rng.gen_range(0.0..spec.room[1] - size[1])];
            if !objects[1..].iter().any(|o| overlaps(o, min, [size[0], size[1]])) {
                placed = Some(min);
                break;
            }
        }
        let Some(min) = placed else {
            return Err(Error::Generation(format!(
                "could not place a non-overlapping {} in {scene_id} after {} attempts",
                class.name, spec.max_retries
            )));
        };
        objects.push(ObjectSpec {
            instance_id: id,
            class_name: class.name.clone(),
            color: pick_color(rng),
            primitive: Primitive::Box,
            min: [min[0], min[1], 0.0],
            size,
        });
    }
    Ok(SceneSpec { scene_id: scene_id.to_string(), split, objects })
}

/// Samples each object's 8 corners plus uniform interior points, so point
/// extents equal the specified boxes.
pub fn render_scene(scene: &SceneSpec, spec: &SyntheticSceneSpec, rng: &mut ChaCha8Rng) -> Result<Scene> {
    let mut points = Vec::new();
    let mut instances = Vec::new();
    for o in &scene.objects {
        let rgb = color_by_name(&o.color)
            .ok_or_else(|| Error::Generation(format!("unknown color {:?}", o.color)))?
            .rgb;
        let n = if o.primitive == Primitive::Slab { spec.floor_points } else { spec.points_per_object };
        let start = points.len();
        for c in 0..8 {
            let p: Vec<f64> = (0..3).map(|k| o.min[k] + if c >> k & 1 == 1 { o.size[k] } else { 0.0 }).collect();
            points.push(Point::new(p[0], p[1], p[2], rgb));
        }
        for _ in 8..n {
            let p: Vec<f64> = (0..3).map(|k| o.min[k] + rng.gen::<f64>() * o.size[k]).collect();
            points.push(Point::new(p[0], p[1], p[2], rgb));
        }
        instances.push(InstanceAnnotation {
            instance_id: o.instance_id,
            class_name: o.class_name.clone(),
            point_indices: (start..points.len()).collect(),
        });
    }
    Scene::new(scene.scene_id.clone(), points, Some(instances))
}

/// Template questions with answers computed from the layout.
pub fn scene_questions(scene: &SceneSpec, classes: &[ClassShape], rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let mut present: Vec<&str> = Vec::new();
    for o in scene.furniture() {
        if !present.contains(&o.class_name.as_str()) {
            present.push(&o.class_name);
        }
    }
    let singles: Vec<&ObjectSpec> = scene.furniture().filter(|o| scene.count(&o.class_name) == 1).collect();
    let mut out = Vec::new();

    let mut colored = singles.clone();
    colored.shuffle(rng);
    for o in colored.iter().take(2) {
        out.push((format!("what color is the {}", o.class_name), o.color.clone()));
    }
    if singles.len() >= 2 {
        let pair: Vec<&&ObjectSpec> = singles.choose_multiple(rng, 2).collect();
        let (a, b) = (pair[0], pair[1]);
        let answer = if a.height() > b.height() { "yes" } else { "no" };
        out.push((format!("is the {} taller than the {}", a.class_name, b.class_name), answer.into()));
    }
    if let Some(c) = present.choose(rng) {
        out.push((format!("how many {} are there", plural(c)), scene.count(c).to_string()));
    }
    let c = &classes[rng.gen_range(0..classes.len())].name;
    let answer = if scene.count(c) > 0 { "yes" } else { "no" };
    out.push((format!("is there a {c} in the room"), answer.into()));
    if let Some(top) = tallest(scene) {
        out.push(("what is the tallest object".into(), top.class_name.clone()));
        out.push(("what color is the tallest object".into(), top.color.clone()));
    }
    out
}

/// The strictly tallest furniture object, if heights do not tie.
fn tallest(scene: &SceneSpec) -> Option<&ObjectSpec> {
    let mut objs: Vec<&ObjectSpec> = scene.furniture().collect();
    objs.sort_by(|a, b| b.height().total_cmp(&a.height()));
    match objs.as_slice() {
        [top] => Some(top),
        [top, next, ..] if top.height() > next.height() => Some(top),
        _ => None,
    }
}

/// A record answered identically, with confidence yes, by every annotator.
pub fn unanimous_record(question_id: String, scene_id: &str, question: &str, answer: &str, split: Split) -> Result<QaRecord> {
    let answers = (0..ANNOTATORS)
        .map(|a| AnswerSubmission::new(answer, Confidence::Yes, format!("sim{a}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(QaRecord { question_id, scene_id: scene_id.to_string(), question: question.to_string(), answers, split })
}

/// Generates `n_scenes` scenes (ids `scene0000`, ...) and their questions.
/// Scene `i` draws from its own random stream, so a scene does not depend
/// on how many others are generated.
pub fn generate_synthetic_benchmark(spec: &SyntheticSceneSpec, n_scenes: usize) -> Result<Benchmark> {
    spec.validate()?;
    let mut split_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let splits = assign_splits(n_scenes, &mut split_rng);
    let mut bench = Benchmark { specs: Vec::new(), scenes: Vec::new(), records: Vec::new() };
    for (i, split) in splits.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let id = format!("scene{i:04}");
        let layout = sample_scene_spec(spec, &id, split, &mut rng)?;
        let scene = render_scene(&layout, spec, &mut rng)?;
        for (j, (q, a)) in scene_questions(&layout, &spec.classes, &mut rng).into_iter().enumerate() {
            bench.records.push(unanimous_record(format!("{id}_q{j:02}"), &id, &q, &a, split)?);
        }
        bench.specs.push(layout);
        bench.scenes.push(scene);
    }
    Ok(bench)
}

/// Color questions produced by the color-QA generator on every benchmark
/// scene, split like their scenes.
pub fn color_qa_corpus(bench: &Benchmark) -> Result<Vec<QaRecord>> {
    let splits: BTreeMap<&str, Split> = bench.specs.iter().map(|s| (s.scene_id.as_str(), s.split)).collect();
    let mut out = Vec::new();
    for scene in &bench.scenes {
        let split = splits.get(scene.scene_id()).copied().unwrap_or(Split::Train);
        for (j, r) in generate_color_qa(scene).into_iter().enumerate() {
            out.push(unanimous_record(format!("{}_c{j:02}", r.scene_id), &r.scene_id, &r.question, &r.answer, split)?);
        }
    }
    Ok(out)
}

/// Model size used for the synthetic benchmark.
pub fn benchmark_model_config() -> FusionConfig {
    FusionConfig { d_h: 32, layers: 2, heads: 2, ff: 64, d_model: 16, f_g: 32, f_a: 32, max_positions: 64 }
}

/// Training schedule used for the synthetic benchmark. The learning rate
/// sits well above the library default so a run fits in about a minute.
pub fn benchmark_train_config(seed: u64, ablation: Ablation) -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        lr_min: 1e-4,
        lr_max: 1e-3,
        period: 200,
        epochs: 100,
        seed,
        ablation,
        ..TrainConfig::default()
    }
}
