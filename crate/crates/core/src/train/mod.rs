//! Training loop, evaluation and the synthetic benchmark.
//!
//! Training is sequential over batches. Inside a batch the per-example
//! gradients are computed in parallel and summed in example order, so a run
//! is bit-for-bit reproducible under a fixed seed regardless of the number
//! of worker threads.

mod bench;
mod eval;

pub use bench::*;
pub use eval::*;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_answer_vocabulary, soft_target, QaRecord, Split};
use crate::error::{Error, Result};
use crate::fusion::{Ablation, Checkpoint, FusionConfig, FusionModel, PreparedScene, SceneFeatures, SceneInput};
use crate::geometry::{propose_objects, PeCodebook, ProposalConfig};
use crate::linguistic::{tokenize, TokenVocabulary, TokenizedQuestion};
use crate::nn::{Gradients, ParamStore, Tensor};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    /// Steps per full triangle of the learning-rate schedule.
    pub period: usize,
    pub epochs: usize,
    pub seed: u64,
    pub ablation: Ablation,
    /// Backpropagate into the point-set encoders instead of caching their
    /// outputs once per scene.
    pub train_encoders: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            lr_min: 1e-8,
            lr_max: 1e-4,
            period: 2000,
            epochs: 20,
            seed: 0,
            ablation: Ablation::Full,
            train_encoders: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr_max && self.lr_max.is_finite()) {
            return bad(format!("need 0 <= lr_min <= lr_max, got {} and {}", self.lr_min, self.lr_max));
        }
        if self.period < 2 {
            return bad(format!("period must be at least 2 steps, got {}", self.period));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps must be positive and weight_decay nonnegative".into());
        }
        Ok(())
    }
}

/// Triangular cyclical schedule: `lr_min` at multiples of `period`, `lr_max`
/// half a period later, linear in between.
pub fn cyclical_lr(step: usize, config: &TrainConfig) -> f64 {
    let half = config.period as f64 / 2.0;
    let x = (step % config.period) as f64 / half;
    let tri = if x <= 1.0 { x } else { 2.0 - x };
    config.lr_min + (config.lr_max - config.lr_min) * tri
}

/// First and second moment estimates, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Tensor> = store.ids().map(|id| {
            let (r, c) = store.get(id).shape();
            Tensor::zeros(r, c)
        }).collect();
        AdamState { m: zeros.clone(), v: zeros }
    }
}

/// One AdamW update of every trainable parameter at `cyclical_lr(step)`.
/// `step` counts from 0; bias correction uses `step + 1`.
pub fn adamw_step(
    store: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    config: &TrainConfig,
    step: usize,
) -> Result<()> {
    let ids: Vec<_> = store.ids().filter(|&id| store.is_trainable(id)).collect();
    for &id in &ids {
        if store.get(id).shape() != grads.get(id).shape() {
            return Err(Error::Training {
                param: store.name(id).to_string(),
                message: format!("gradient shape {:?} != parameter shape {:?}", grads.get(id).shape(), store.get(id).shape()),
            });
        }
        if grads.get(id).data().iter().any(|g| !g.is_finite()) {
            return Err(Error::Training { param: store.name(id).to_string(), message: "non-finite gradient".into() });
        }
    }
    let lr = cyclical_lr(step, config);
    let t = (step + 1) as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for id in ids {
        let i = id.index();
        let g = grads.get(id).data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = store.get_mut(id).data_mut();
        for j in 0..p.len() {
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            let update = (m[j] / c1) / ((v[j] / c2).sqrt() + config.eps);
            p[j] -= lr * (update + config.weight_decay * p[j]);
        }
    }
    Ok(())
}

/// Encoder-ready inputs for a set of scenes, keyed by scene id.
#[derive(Debug, Clone, Default)]
pub struct SceneBank {
    index: BTreeMap<String, usize>,
    prepared: Vec<PreparedScene>,
}

impl SceneBank {
    pub fn new(scenes: &[Scene], proposals: &ProposalConfig, codebook: &PeCodebook) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, s) in scenes.iter().enumerate() {
            if index.insert(s.scene_id().to_string(), i).is_some() {
                return Err(Error::Validation(format!("duplicate scene id {:?}", s.scene_id())));
            }
        }
        let prepared = scenes
            .par_iter()
            .map(|s| Ok(PreparedScene::new(s, &propose_objects(s, proposals)?, codebook)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneBank { index, prepared })
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    pub fn position(&self, scene_id: &str) -> Option<usize> {
        self.index.get(scene_id).copied()
    }

    pub fn get(&self, scene_id: &str) -> Option<&PreparedScene> {
        self.position(scene_id).map(|i| &self.prepared[i])
    }

    /// Encoder outputs of every scene under `model`'s current weights.
    pub fn features(&self, model: &FusionModel) -> Vec<SceneFeatures> {
        self.prepared.par_iter().map(|p| model.scene_features(p)).collect()
    }
}

/// A question ready for the model, with its scene resolved to a bank index.
pub(crate) struct Example {
    pub tokens: TokenizedQuestion,
    pub scene: Option<usize>,
    pub target: Vec<f64>,
}

/// Resolves the scene of each record; under `qonly` scenes are never read.
pub(crate) fn resolve_scene(record: &QaRecord, bank: &SceneBank, ablation: Ablation) -> Result<Option<usize>> {
    if ablation == Ablation::Qonly {
        return Ok(None);
    }
    bank.position(&record.scene_id).map(Some).ok_or_else(|| {
        Error::Validation(format!("question {} refers to unknown scene {:?}", record.question_id, record.scene_id))
    })
}

/// Scene features or prepared inputs, depending on whether encoders train.
pub(crate) enum SceneSource<'a> {
    Cached(Vec<SceneFeatures>, SceneFeatures),
    Live(&'a SceneBank, SceneFeatures),
}

impl<'a> SceneSource<'a> {
    pub fn new(model: &FusionModel, bank: &'a SceneBank, ablation: Ablation, live: bool) -> Self {
        let empty = SceneFeatures::empty(model.config());
        if live {
            SceneSource::Live(bank, empty)
        } else if ablation == Ablation::Qonly {
            SceneSource::Cached(Vec::new(), empty)
        } else {
            SceneSource::Cached(bank.features(model), empty)
        }
    }

    pub fn input(&self, scene: Option<usize>) -> SceneInput<'_> {
        match (self, scene) {
            (SceneSource::Cached(f, _), Some(i)) => SceneInput::Features(&f[i]),
            (SceneSource::Live(bank, _), Some(i)) => SceneInput::Prepared(&bank.prepared[i]),
            (SceneSource::Cached(_, empty), None) | (SceneSource::Live(_, empty), None) => SceneInput::Features(empty),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Train/val questions used as examples.
    pub examples: usize,
    /// Train/val questions with no correct answer in the vocabulary.
    pub skipped: usize,
}

/// Trains on the train and val splits. The answer vocabulary comes from the
/// train split alone.
pub fn train(
    records: &[QaRecord],
    bank: &SceneBank,
    tokens: &TokenVocabulary,
    model_config: &FusionConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    let answers = build_answer_vocabulary(records);
    if answers.is_empty() {
        return Err(Error::Config("answer vocabulary is empty: no train answer occurs often enough".into()));
    }
    let mut model = FusionModel::new(*model_config, tokens.len(), answers.len(), config.seed)?;
    if !config.train_encoders {
        for id in model.encoder_params() {
            model.params_mut().set_trainable(id, false);
        }
    }

    let mut examples = Vec::new();
    let mut skipped = 0;
    for r in records.iter().filter(|r| matches!(r.split, Split::Train | Split::Val)) {
        let Some(target) = soft_target(r, &answers) else {
            skipped += 1;
            continue;
        };
        let scene = resolve_scene(r, bank, config.ablation)?;
        examples.push(Example { tokens: tokenize(&r.question, tokens), scene, target });
    }
    if examples.is_empty() {
        return Err(Error::Config("no train/val question has a correct answer in the vocabulary".into()));
    }
    log::info!(
        "training {} on {} questions ({} skipped), {} answers, {} parameters",
        config.ablation,
        examples.len(),
        skipped,
        answers.len(),
        model.params().numel()
    );

    let mut state = AdamState::new(model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0;
    let source = SceneSource::new(&model, bank, config.ablation, config.train_encoders);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let results: Vec<Result<(f64, Gradients)>> = batch
                .par_iter()
                .map(|&i| {
                    let ex = &examples[i];
                    model.loss_and_gradients(&ex.tokens, source.input(ex.scene), config.ablation, &ex.target, scale)
                })
                .collect();
            let mut sum: Option<Gradients> = None;
            for r in results {
                let (loss, g) = r?;
                total += loss;
                match &mut sum {
                    None => sum = Some(g),
                    Some(acc) => acc.accumulate(&g),
                }
            }
            let grads = sum.expect("chunks are nonempty");
            adamw_step(model.params_mut(), &grads, &mut state, config, step)?;
            step += 1;
        }
        let mean = total / examples.len() as f64;
        log::info!("epoch {} loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }
    let n = examples.len();
    let checkpoint = Checkpoint { model, tokens: tokens.clone(), answers, ablation: config.ablation };
    Ok(TrainOutcome { checkpoint, epoch_losses, examples: n, skipped })
}
