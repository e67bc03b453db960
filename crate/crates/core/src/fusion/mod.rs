//! The fusion transformer: scene and question elements are assembled into
//! one sequence, passed through post-norm self-attention layers, and the
//! `[CLS]` output is classified over the candidate answers.

mod checkpoint;
mod elements;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use elements::{Element, ElementKind, ElementSequence, EmbeddingType};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::appearance::{appearance_inputs, APPEARANCE_INPUT_DIM};
use crate::encoder::PointSetEncoder;
use crate::error::{Error, Result};
use crate::geometry::{centered, positional_encode, spatial_vector, ObjectProposal, PeCodebook};
use crate::linguistic::TokenizedQuestion;
use crate::nn::{cross_entropy_value, Gradients, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scene::Scene;

/// Layer-norm epsilon used throughout the transformer.
pub const LN_EPS: f64 = 1e-12;
/// Standard deviation of the transformer's initial weights.
pub const INIT_STD: f64 = 0.02;
/// Additive attention bias for masked positions.
const MASK_BIAS: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub d_h: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff: usize,
    /// Width of the sinusoidal code per spatial component.
    pub d_model: usize,
    /// Geometry feature width.
    pub f_g: usize,
    /// Appearance feature width.
    pub f_a: usize,
    /// Rows of the position table; questions are cut to fit.
    pub max_positions: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { d_h: 64, layers: 4, heads: 4, ff: 128, d_model: 16, f_g: 64, f_a: 64, max_positions: 128 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_h", self.d_h),
            ("layers", self.layers),
            ("heads", self.heads),
            ("ff", self.ff),
            ("d_model", self.d_model),
            ("f_g", self.f_g),
            ("f_a", self.f_a),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.d_h % self.heads != 0 {
            return Err(Error::Config(format!("d_h {} is not divisible by heads {}", self.d_h, self.heads)));
        }
        if self.d_model % 2 != 0 {
            return Err(Error::Config(format!("d_model {} must be even", self.d_model)));
        }
        if self.max_positions < 8 {
            return Err(Error::Config(format!("max_positions {} is below 8", self.max_positions)));
        }
        Ok(())
    }

    /// Length of the spatial embedding of one proposal.
    pub fn spatial_len(&self) -> usize {
        12 * self.d_model
    }

    /// Longest question (in tokens) that still leaves room for the layout.
    pub fn max_question_tokens(&self) -> usize {
        self.max_positions - 6
    }
}

/// Which streams reach the transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    /// Question tokens only; scene features never enter.
    Qonly,
    /// Geometry elements and the geometry half of the global feature.
    GeoQ,
    /// Appearance elements and the appearance half of the global feature.
    AppQ,
    /// Geometry elements keep their feature but lose the spatial embedding.
    #[serde(alias = "no_spa_embedding")]
    NoSpa,
    /// One concatenated element per proposal instead of two.
    #[serde(alias = "one_element_for_all")]
    OneElement,
}

impl Ablation {
    pub const ALL: [Ablation; 6] =
        [Ablation::Full, Ablation::Qonly, Ablation::GeoQ, Ablation::AppQ, Ablation::NoSpa, Ablation::OneElement];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::Qonly => "qonly",
            Ablation::GeoQ => "geo_q",
            Ablation::AppQ => "app_q",
            Ablation::NoSpa => "no_spa",
            Ablation::OneElement => "one_element",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_spa_embedding" => Ok(Ablation::NoSpa),
            "one_element_for_all" => Ok(Ablation::OneElement),
            _ => Ablation::ALL
                .into_iter()
                .find(|a| a.name() == s)
                .ok_or_else(|| Error::Config(format!("unknown ablation {s:?}"))),
        }
    }
}

/// Encoder-ready inputs of one scene: nothing here depends on weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedScene {
    /// `N x 6` appearance input.
    pub appearance_input: Tensor,
    /// `N x 3` centered coordinates of the whole scene.
    pub centered: Tensor,
    pub proposals: Vec<PreparedProposal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedProposal {
    pub centered: Tensor,
    pub indices: Vec<usize>,
    pub spatial: Vec<f64>,
}

impl PreparedScene {
    pub fn new(scene: &Scene, proposals: &[ObjectProposal], codebook: &PeCodebook) -> Self {
        let xyz = scene.strip_color();
        PreparedScene {
            appearance_input: appearance_inputs(scene),
            centered: centered(&xyz),
            proposals: proposals
                .iter()
                .map(|p| {
                    let pts: Vec<[f64; 3]> = p.point_indices.iter().map(|&i| xyz[i]).collect();
                    PreparedProposal {
                        centered: centered(&pts),
                        indices: p.point_indices.clone(),
                        spatial: positional_encode(&spatial_vector(&p.bbox, scene.extents()), codebook),
                    }
                })
                .collect(),
        }
    }
}

/// Encoder outputs for one scene, in proposal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFeatures {
    pub geometry: Vec<Vec<f64>>,
    pub spatial: Vec<Vec<f64>>,
    pub appearance: Vec<Vec<f64>>,
    pub global_appearance: Vec<f64>,
    pub global_geometry: Vec<f64>,
}

impl SceneFeatures {
    /// A scene with no proposals and all-zero global features.
    pub fn empty(config: &FusionConfig) -> Self {
        SceneFeatures {
            geometry: Vec::new(),
            spatial: Vec::new(),
            appearance: Vec::new(),
            global_appearance: vec![0.0; config.f_a],
            global_geometry: vec![0.0; config.f_g],
        }
    }

    pub fn num_proposals(&self) -> usize {
        self.geometry.len()
    }
}

/// Scene input to a forward pass: fixed features, or raw inputs run through
/// the encoders on the same tape so their weights receive gradients.
#[derive(Debug, Clone, Copy)]
pub enum SceneInput<'a> {
    Features(&'a SceneFeatures),
    Prepared(&'a PreparedScene),
}

/// Scene-side nodes on a tape.
#[derive(Debug, Clone)]
pub(crate) struct SceneVars {
    k: usize,
    geometry: Option<Var>,
    spatial: Option<Var>,
    appearance: Option<Var>,
    global_appearance: Var,
    global_geometry: Var,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Projection {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct LayerIds {
    q: Projection,
    k: Projection,
    v: Projection,
    o: Projection,
    ln1: Projection,
    ff1: Projection,
    ff2: Projection,
    ln2: Projection,
}

#[derive(Debug, Clone, PartialEq)]
struct ModelIds {
    token_embedding: ParamId,
    position_embedding: ParamId,
    /// `[kind][embedding type]`.
    scales: [[ParamId; 3]; 4],
    geometry_proj: Projection,
    appearance_proj: Projection,
    global_proj: Projection,
    combined_proj: Projection,
    embedding_ln: Projection,
    layers: Vec<LayerIds>,
    classifier: Projection,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Normal,
    Zeros,
    Ones,
}

/// Every transformer parameter with its shape and initializer, in
/// registration order.
fn param_layout(cfg: &FusionConfig, vocab: usize, answers: usize) -> Vec<(String, usize, usize, Init)> {
    let d = cfg.d_h;
    let mut v: Vec<(String, usize, usize, Init)> = vec![
        ("embed.token".into(), vocab, d, Init::Normal),
        ("embed.position".into(), cfg.max_positions, d, Init::Normal),
    ];
    for kind in ElementKind::ALL {
        for ty in EmbeddingType::ALL {
            v.push((format!("scale.{}.{}", kind.name(), ty.name()), 1, 1, Init::Ones));
        }
    }
    fn linear(v: &mut Vec<(String, usize, usize, Init)>, name: &str, rows: usize, cols: usize) {
        v.push((format!("{name}.w"), rows, cols, Init::Normal));
        v.push((format!("{name}.b"), 1, cols, Init::Zeros));
    }
    fn norm(v: &mut Vec<(String, usize, usize, Init)>, name: &str, d: usize) {
        v.push((format!("{name}.w"), 1, d, Init::Ones));
        v.push((format!("{name}.b"), 1, d, Init::Zeros));
    }
    linear(&mut v, "proj.geometry", cfg.f_g + cfg.spatial_len(), d);
    linear(&mut v, "proj.appearance", cfg.f_a, d);
    linear(&mut v, "proj.global", cfg.f_a + cfg.f_g, d);
    linear(&mut v, "proj.combined", cfg.f_g + cfg.spatial_len() + cfg.f_a, d);
    norm(&mut v, "embed.ln", d);
    for l in 0..cfg.layers {
        for p in ["q", "k", "v", "o"] {
            linear(&mut v, &format!("layer{l}.attn.{p}"), d, d);
        }
        norm(&mut v, &format!("layer{l}.ln1"), d);
        linear(&mut v, &format!("layer{l}.ff1"), d, cfg.ff);
        linear(&mut v, &format!("layer{l}.ff2"), cfg.ff, d);
        norm(&mut v, &format!("layer{l}.ln2"), d);
    }
    linear(&mut v, "classifier", d, answers);
    v
}

impl ModelIds {
    fn lookup(store: &ParamStore, cfg: &FusionConfig) -> Result<Self> {
        let get = |name: &str| store.find(name).ok_or_else(|| Error::Validation(format!("missing parameter {name}")));
        let proj = |name: &str| -> Result<Projection> { Ok(Projection { w: get(&format!("{name}.w"))?, b: get(&format!("{name}.b"))? }) };
        let mut scales = [[ParamId(0); 3]; 4];
        for kind in ElementKind::ALL {
            for ty in EmbeddingType::ALL {
                scales[kind as usize][ty as usize] = get(&format!("scale.{}.{}", kind.name(), ty.name()))?;
            }
        }
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            layers.push(LayerIds {
                q: proj(&format!("layer{l}.attn.q"))?,
                k: proj(&format!("layer{l}.attn.k"))?,
                v: proj(&format!("layer{l}.attn.v"))?,
                o: proj(&format!("layer{l}.attn.o"))?,
                ln1: proj(&format!("layer{l}.ln1"))?,
                ff1: proj(&format!("layer{l}.ff1"))?,
                ff2: proj(&format!("layer{l}.ff2"))?,
                ln2: proj(&format!("layer{l}.ln2"))?,
            });
        }
        Ok(ModelIds {
            token_embedding: get("embed.token")?,
            position_embedding: get("embed.position")?,
            scales,
            geometry_proj: proj("proj.geometry")?,
            appearance_proj: proj("proj.appearance")?,
            global_proj: proj("proj.global")?,
            combined_proj: proj("proj.combined")?,
            embedding_ln: proj("embed.ln")?,
            layers,
            classifier: proj("classifier")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    config: FusionConfig,
    token_vocab_size: usize,
    num_answers: usize,
    store: ParamStore,
    geometry_encoder: PointSetEncoder,
    appearance_encoder: PointSetEncoder,
    ids: ModelIds,
}

impl FusionModel {
    /// A freshly initialized model. Both point encoders live in the same
    /// parameter store so checkpoints and optimizers see one flat set.
    pub fn new(config: FusionConfig, token_vocab_size: usize, num_answers: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if num_answers == 0 {
            return Err(Error::Config("answer vocabulary is empty".into()));
        }
        if token_vocab_size == 0 {
            return Err(Error::Config("token vocabulary is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        PointSetEncoder::new(&mut store, "enc.geometry", 3, config.f_g, &mut rng);
        PointSetEncoder::new(&mut store, "enc.appearance", APPEARANCE_INPUT_DIM, config.f_a, &mut rng);
        for (name, rows, cols, init) in param_layout(&config, token_vocab_size, num_answers) {
            match init {
                Init::Normal => store.add_normal(&name, rows, cols, INIT_STD, &mut rng),
                Init::Zeros => store.add(name, Tensor::zeros(rows, cols)),
                Init::Ones => store.add(name, Tensor::filled(rows, cols, 1.0)),
            };
        }
        Self::from_store(config, store)
    }

    /// Binds a model to an existing parameter store (as read from a
    /// checkpoint). Shapes are checked against `config`.
    pub fn from_store(config: FusionConfig, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let ids = ModelIds::lookup(&store, &config)?;
        let (token_vocab_size, _) = store.get(ids.token_embedding).shape();
        let (_, num_answers) = store.get(ids.classifier.w).shape();
        for (name, rows, cols, _) in param_layout(&config, token_vocab_size, num_answers) {
            let got = store.get(store.find(&name).expect("looked up above")).shape();
            if got != (rows, cols) {
                return Err(Error::Validation(format!(
                    "parameter {name} has shape {}x{}, expected {rows}x{cols}",
                    got.0, got.1
                )));
            }
        }
        let enc = |prefix: &str, input: usize, width: usize| -> Result<PointSetEncoder> {
            let e = PointSetEncoder::from_store(&store, prefix)
                .ok_or_else(|| Error::Validation(format!("missing encoder {prefix}")))?;
            if e.input_dim() != input || e.width() != width {
                return Err(Error::Validation(format!("encoder {prefix} has the wrong shape")));
            }
            Ok(e)
        };
        let geometry_encoder = enc("enc.geometry", 3, config.f_g)?;
        let appearance_encoder = enc("enc.appearance", APPEARANCE_INPUT_DIM, config.f_a)?;
        Ok(FusionModel { config, token_vocab_size, num_answers, store, geometry_encoder, appearance_encoder, ids })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn num_answers(&self) -> usize {
        self.num_answers
    }

    pub fn token_vocab_size(&self) -> usize {
        self.token_vocab_size
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn geometry_encoder(&self) -> &PointSetEncoder {
        &self.geometry_encoder
    }

    pub fn appearance_encoder(&self) -> &PointSetEncoder {
        &self.appearance_encoder
    }

    /// Parameters of both point encoders.
    pub fn encoder_params(&self) -> Vec<ParamId> {
        let mut v = self.geometry_encoder.param_ids().to_vec();
        v.extend(self.appearance_encoder.param_ids());
        v
    }

    /// The scale scalar for `kind` and `ty`.
    pub fn scale_param(&self, kind: ElementKind, ty: EmbeddingType) -> ParamId {
        self.ids.scales[kind as usize][ty as usize]
    }

    pub fn classifier_bias(&self) -> ParamId {
        self.ids.classifier.b
    }

    pub fn codebook(&self) -> PeCodebook {
        PeCodebook::new(self.config.d_model).expect("validated d_model")
    }

    /// Encoder outputs for a prepared scene: max-pooled per proposal, mean
    /// (appearance) and max (geometry) over the whole scene.
    pub fn scene_features(&self, prepared: &PreparedScene) -> SceneFeatures {
        let mut tape = Tape::new(&self.store);
        let vars = self.encode_scene(&mut tape, prepared);
        let rows = |v: Option<Var>| -> Vec<Vec<f64>> {
            v.map(|v| {
                let t = tape.value(v);
                (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
            })
            .unwrap_or_default()
        };
        SceneFeatures {
            geometry: rows(vars.geometry),
            spatial: rows(vars.spatial),
            appearance: rows(vars.appearance),
            global_appearance: tape.value(vars.global_appearance).data().to_vec(),
            global_geometry: tape.value(vars.global_geometry).data().to_vec(),
        }
    }

    pub(crate) fn encode_scene(&self, tape: &mut Tape, prepared: &PreparedScene) -> SceneVars {
        let app_in = tape.input(prepared.appearance_input.clone());
        let app_points = self.appearance_encoder.per_point(tape, app_in);
        let global_appearance = tape.mean_rows(app_points);
        let scene_in = tape.input(prepared.centered.clone());
        let scene_geo = self.geometry_encoder.per_point(tape, scene_in);
        let global_geometry = tape.max_rows(scene_geo);
        let k = prepared.proposals.len();
        if k == 0 {
            return SceneVars { k, geometry: None, spatial: None, appearance: None, global_appearance, global_geometry };
        }
        let mut geo = Vec::with_capacity(k);
        let mut app = Vec::with_capacity(k);
        for p in &prepared.proposals {
            let x = tape.input(p.centered.clone());
            let h = self.geometry_encoder.per_point(tape, x);
            geo.push(tape.max_rows(h));
            let rows = tape.gather_rows(app_points, &p.indices);
            app.push(tape.max_rows(rows));
        }
        let spatial: Vec<Vec<f64>> = prepared.proposals.iter().map(|p| p.spatial.clone()).collect();
        let spatial = tape.input(Tensor::from_rows(&spatial, self.config.spatial_len()));
        SceneVars {
            k,
            geometry: Some(tape.concat_rows(&geo)),
            spatial: Some(spatial),
            appearance: Some(tape.concat_rows(&app)),
            global_appearance,
            global_geometry,
        }
    }

    pub(crate) fn feature_vars(&self, tape: &mut Tape, f: &SceneFeatures, one_element: bool) -> Result<SceneVars> {
        let cfg = &self.config;
        let (geo_name, app_name) = if one_element {
            ("combined-projection", "combined-projection")
        } else {
            ("geometry-projection", "appearance-projection")
        };
        check_len("global-projection", cfg.f_a, f.global_appearance.len())?;
        check_len("global-projection", cfg.f_g, f.global_geometry.len())?;
        let k = f.geometry.len();
        if f.spatial.len() != k || f.appearance.len() != k {
            return Err(Error::Validation(format!(
                "feature lists disagree on the proposal count: {k} geometry, {} spatial, {} appearance",
                f.spatial.len(),
                f.appearance.len()
            )));
        }
        for i in 0..k {
            check_len(geo_name, cfg.f_g, f.geometry[i].len())?;
            check_len(geo_name, cfg.spatial_len(), f.spatial[i].len())?;
            check_len(app_name, cfg.f_a, f.appearance[i].len())?;
        }
        let global_appearance = tape.input(Tensor::row_vector(f.global_appearance.clone()));
        let global_geometry = tape.input(Tensor::row_vector(f.global_geometry.clone()));
        let block = |tape: &mut Tape, rows: &[Vec<f64>], cols: usize| {
            if k == 0 {
                None
            } else {
                Some(tape.input(Tensor::from_rows(rows, cols)))
            }
        };
        Ok(SceneVars {
            k,
            geometry: block(tape, &f.geometry, cfg.f_g),
            spatial: block(tape, &f.spatial, cfg.spatial_len()),
            appearance: block(tape, &f.appearance, cfg.f_a),
            global_appearance,
            global_geometry,
        })
    }

    /// The transformer stack on an `n x d_h` input, returning `1 x m`
    /// logits read at row 0.
    pub(crate) fn encode(&self, tape: &mut Tape, x: Var, mask: &[bool]) -> Var {
        let cfg = &self.config;
        let n = tape.value(x).rows();
        let dk = cfg.d_h / cfg.heads;
        let bias = if mask.iter().all(|m| *m) {
            None
        } else {
            let mut b = Tensor::zeros(n, n);
            for r in 0..n {
                for (c, &keep) in mask.iter().enumerate() {
                    if !keep {
                        b.set(r, c, MASK_BIAS);
                    }
                }
            }
            Some(tape.input(b))
        };
        let ln = self.ids.embedding_ln;
        let mut h = tape.layer_norm(x, ln.w, ln.b, LN_EPS);
        for layer in &self.ids.layers {
            let q = tape.affine(h, layer.q.w, layer.q.b);
            let k = tape.affine(h, layer.k.w, layer.k.b);
            let v = tape.affine(h, layer.v.w, layer.v.b);
            let mut heads = Vec::with_capacity(cfg.heads);
            for head in 0..cfg.heads {
                let qh = tape.slice_cols(q, head * dk, dk);
                let kh = tape.slice_cols(k, head * dk, dk);
                let vh = tape.slice_cols(v, head * dk, dk);
                let s = tape.matmul_bt(qh, kh);
                let mut s = tape.scale_const(s, 1.0 / (dk as f64).sqrt());
                if let Some(b) = bias {
                    s = tape.add(s, b);
                }
                let a = tape.softmax(s);
                heads.push(tape.matmul(a, vh));
            }
            let ctx = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
            let attn = tape.affine(ctx, layer.o.w, layer.o.b);
            let r = tape.add(h, attn);
            let h1 = tape.layer_norm(r, layer.ln1.w, layer.ln1.b, LN_EPS);
            let f = tape.affine(h1, layer.ff1.w, layer.ff1.b);
            let f = tape.gelu(f);
            let f = tape.affine(f, layer.ff2.w, layer.ff2.b);
            let r = tape.add(h1, f);
            h = tape.layer_norm(r, layer.ln2.w, layer.ln2.b, LN_EPS);
        }
        let cls = tape.gather_rows(h, &[0]);
        tape.affine(cls, self.ids.classifier.w, self.ids.classifier.b)
    }

    /// Logits over the answer vocabulary.
    pub fn forward(&self, seq: &ElementSequence) -> Vec<f64> {
        let mut tape = Tape::new(&self.store);
        let x = tape.input(seq.input_matrix(self));
        let logits = self.encode(&mut tape, x, &seq.attention_mask);
        tape.value(logits).data().to_vec()
    }

    /// Assembles and runs the model in one pass.
    pub fn predict(&self, tokens: &TokenizedQuestion, scene: SceneInput, ablation: Ablation) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.store);
        let built = self.build(&mut tape, tokens, scene, ablation)?;
        let logits = self.encode(&mut tape, built.input, &built.mask);
        Ok(tape.value(logits).data().to_vec())
    }

    /// Cross-entropy loss against `target` and the gradient of
    /// `loss_scale * loss` for every parameter.
    pub fn loss_and_gradients(
        &self,
        tokens: &TokenizedQuestion,
        scene: SceneInput,
        ablation: Ablation,
        target: &[f64],
        loss_scale: f64,
    ) -> Result<(f64, Gradients)> {
        check_target(target, self.num_answers)?;
        let mut tape = Tape::new(&self.store);
        let built = self.build(&mut tape, tokens, scene, ablation)?;
        let logits = self.encode(&mut tape, built.input, &built.mask);
        let loss = tape.cross_entropy(logits, target);
        let value = tape.value(loss).get(0, 0);
        let back = tape.backward_with(loss, Tensor::scalar(loss_scale));
        Ok((value, back.params))
    }
}

fn check_len(projection: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape { projection, expected, got });
    }
    Ok(())
}

fn check_target(target: &[f64], m: usize) -> Result<()> {
    if target.len() != m {
        return Err(Error::Validation(format!("target has {} entries, expected {m}", target.len())));
    }
    if target.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Validation("target entries must be finite and nonnegative".into()));
    }
    let sum: f64 = target.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("target sums to {sum}, expected 1")));
    }
    Ok(())
}

/// `-sum(target * log softmax(logits))`; `target` must be a distribution.
pub fn loss(logits: &[f64], target: &[f64]) -> Result<f64> {
    check_target(target, logits.len())?;
    Ok(cross_entropy_value(logits, target))
}
