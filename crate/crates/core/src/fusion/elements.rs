use super::{Ablation, FusionModel, SceneInput};
use crate::error::{Error, Result};
use crate::linguistic::{TokenizedQuestion, APP_ID, CLS_ID, GEO_ID, SEP_ID};
use crate::nn::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Linguistic = 0,
    Appearance = 1,
    Geometry = 2,
    /// `[CLS]` and `[SEP]`.
    Auxiliary = 3,
}

impl ElementKind {
    pub const ALL: [ElementKind; 4] =
        [ElementKind::Linguistic, ElementKind::Appearance, ElementKind::Geometry, ElementKind::Auxiliary];

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Linguistic => "linguistic",
            ElementKind::Appearance => "appearance",
            ElementKind::Geometry => "geometry",
            ElementKind::Auxiliary => "auxiliary",
        }
    }
}

/// The three embeddings summed into every element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingType {
    /// Point-cloud feature embedding.
    Pcf = 0,
    Token = 1,
    Position = 2,
}

impl EmbeddingType {
    pub const ALL: [EmbeddingType; 3] = [EmbeddingType::Pcf, EmbeddingType::Token, EmbeddingType::Position];

    pub fn name(self) -> &'static str {
        match self {
            EmbeddingType::Pcf => "pcf",
            EmbeddingType::Token => "token",
            EmbeddingType::Position => "position",
        }
    }
}

/// One transformer input position with its unscaled embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub token_id: usize,
    pub position: usize,
    /// All zeros when scene features are switched off.
    pub pcf: Vec<f64>,
    pub token: Vec<f64>,
    pub seq_pos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementSequence {
    pub elements: Vec<Element>,
    pub attention_mask: Vec<bool>,
}

impl ElementSequence {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Rows of `scale_pcf * pcf + scale_token * token + scale_pos * seq_pos`,
    /// with the scales of each element's kind.
    pub fn input_matrix(&self, model: &FusionModel) -> Tensor {
        let d = model.config().d_h;
        let mut x = Tensor::zeros(self.len(), d);
        for (r, e) in self.elements.iter().enumerate() {
            let s = |ty| model.params().get(model.scale_param(e.kind, ty)).get(0, 0);
            let (sp, st, spos) = (s(EmbeddingType::Pcf), s(EmbeddingType::Token), s(EmbeddingType::Position));
            for (c, out) in x.row_mut(r).iter_mut().enumerate() {
                *out = (e.pcf[c] * sp + e.token[c] * st) + e.seq_pos[c] * spos;
            }
        }
        x
    }
}

struct Block {
    kind: ElementKind,
    pcf: Option<Var>,
    token: Var,
    position: Var,
    token_ids: Vec<usize>,
    positions: Vec<usize>,
}

pub(crate) struct Built {
    pub input: Var,
    pub mask: Vec<bool>,
    blocks: Vec<Block>,
    /// Layout row -> row of the block-concatenated matrix.
    order: Vec<usize>,
}

impl FusionModel {
    fn block(
        &self,
        tape: &mut Tape,
        kind: ElementKind,
        pcf: Option<Var>,
        token_ids: Vec<usize>,
        positions: Vec<usize>,
    ) -> Block {
        let token = tape.param_rows(self.ids.token_embedding, &token_ids);
        let position = tape.param_rows(self.ids.position_embedding, &positions);
        Block { kind, pcf, token, position, token_ids, positions }
    }

    fn block_sum(&self, tape: &mut Tape, b: &Block) -> Var {
        let scale = |tape: &mut Tape, ty: EmbeddingType| tape.param(self.scale_param(b.kind, ty));
        let st = scale(tape, EmbeddingType::Token);
        let tok = tape.scale_by(b.token, st);
        let sum = match b.pcf {
            Some(pcf) => {
                let sp = scale(tape, EmbeddingType::Pcf);
                let p = tape.scale_by(pcf, sp);
                tape.add(p, tok)
            }
            None => tok,
        };
        let spos = scale(tape, EmbeddingType::Position);
        let pos = tape.scale_by(b.position, spos);
        tape.add(sum, pos)
    }

    fn question_ids(&self, tokens: &TokenizedQuestion) -> Result<Vec<usize>> {
        let mut ids = tokens.token_ids.clone();
        ids.truncate(self.config.max_question_tokens());
        if ids.is_empty() {
            return Err(Error::Validation("tokenized question is empty".into()));
        }
        if let Some(bad) = ids.iter().find(|&&i| i >= self.token_vocab_size) {
            return Err(Error::Validation(format!(
                "token id {bad} is outside the vocabulary of {}",
                self.token_vocab_size
            )));
        }
        Ok(ids)
    }

    /// Records the element sequence on `tape` and returns its input matrix
    /// in layout order: `[CLS] q.. [SEP] app.. [SEP] geo.. [SEP]`, or
    /// `[CLS] q.. [SEP] obj.. [SEP]` when each proposal is one element.
    pub(crate) fn build(
        &self,
        tape: &mut Tape,
        tokens: &TokenizedQuestion,
        scene: SceneInput,
        ablation: Ablation,
    ) -> Result<Built> {
        let cfg = self.config;
        let q = self.question_ids(tokens)?;
        let t = q.len();
        let (cls, sep, app_tok, geo_tok) = (CLS_ID, SEP_ID, APP_ID, GEO_ID);

        let scene = match ablation {
            Ablation::Qonly => None,
            _ => Some(match scene {
                SceneInput::Features(f) => self.feature_vars(tape, f, ablation == Ablation::OneElement)?,
                SceneInput::Prepared(p) => self.encode_scene(tape, p),
            }),
        };
        let global = match &scene {
            None => None,
            Some(sv) => {
                let ga = if ablation == Ablation::GeoQ {
                    tape.input(Tensor::zeros(1, cfg.f_a))
                } else {
                    sv.global_appearance
                };
                let gg = if ablation == Ablation::AppQ {
                    tape.input(Tensor::zeros(1, cfg.f_g))
                } else {
                    sv.global_geometry
                };
                let cat = tape.concat_cols(&[ga, gg]);
                Some(tape.affine(cat, self.ids.global_proj.w, self.ids.global_proj.b))
            }
        };
        let repeat = |tape: &mut Tape, n: usize| global.map(|g| tape.gather_rows(g, &vec![0; n]));

        let one_element = ablation == Ablation::OneElement;
        let (aux_tokens, aux_pos) = if one_element {
            (vec![cls, sep, sep], vec![0, t + 1, t + 3])
        } else {
            (vec![cls, sep, sep, sep], vec![0, t + 1, t + 3, t + 5])
        };
        let n_aux = aux_tokens.len();
        let pcf = repeat(tape, n_aux);
        let mut blocks = vec![self.block(tape, ElementKind::Auxiliary, pcf, aux_tokens, aux_pos)];
        let pcf = repeat(tape, t);
        blocks.push(self.block(tape, ElementKind::Linguistic, pcf, q, (1..=t).collect()));

        let mut app_rows = 0;
        let mut geo_rows = 0;
        if let Some(sv) = scene.as_ref().filter(|sv| sv.k > 0) {
            let k = sv.k;
            let (geo, spatial, app) = (sv.geometry.unwrap(), sv.spatial.unwrap(), sv.appearance.unwrap());
            let spatial = if ablation == Ablation::NoSpa {
                tape.input(Tensor::zeros(k, cfg.spatial_len()))
            } else {
                spatial
            };
            if one_element {
                let cat = tape.concat_cols(&[geo, spatial, app]);
                let p = tape.affine(cat, self.ids.combined_proj.w, self.ids.combined_proj.b);
                blocks.push(self.block(tape, ElementKind::Geometry, Some(p), vec![geo_tok; k], vec![t + 2; k]));
                app_rows = k;
            } else {
                if matches!(ablation, Ablation::Full | Ablation::AppQ | Ablation::NoSpa) {
                    let p = tape.affine(app, self.ids.appearance_proj.w, self.ids.appearance_proj.b);
                    blocks.push(self.block(tape, ElementKind::Appearance, Some(p), vec![app_tok; k], vec![t + 2; k]));
                    app_rows = k;
                }
                if matches!(ablation, Ablation::Full | Ablation::GeoQ | Ablation::NoSpa) {
                    let cat = tape.concat_cols(&[geo, spatial]);
                    let p = tape.affine(cat, self.ids.geometry_proj.w, self.ids.geometry_proj.b);
                    blocks.push(self.block(tape, ElementKind::Geometry, Some(p), vec![geo_tok; k], vec![t + 4; k]));
                    geo_rows = k;
                }
            }
        }

        let sums: Vec<Var> = blocks.iter().map(|b| self.block_sum(tape, b)).collect();
        let stacked = tape.concat_rows(&sums);
        let ling = n_aux;
        let first = ling + t;
        let second = first + app_rows;
        let mut order = vec![0];
        order.extend(ling..ling + t);
        order.push(1);
        order.extend(first..first + app_rows);
        order.push(2);
        if !one_element {
            order.extend(second..second + geo_rows);
            order.push(3);
        }
        let input = tape.gather_rows(stacked, &order);
        let mask = vec![true; order.len()];
        Ok(Built { input, mask, blocks, order })
    }

    /// The element sequence with every embedding materialized.
    pub fn assemble_elements(
        &self,
        tokens: &TokenizedQuestion,
        scene: SceneInput,
        ablation: Ablation,
    ) -> Result<ElementSequence> {
        let mut tape = Tape::new(&self.store);
        let built = self.build(&mut tape, tokens, scene, ablation)?;
        let d = self.config.d_h;
        let mut flat = Vec::new();
        for b in &built.blocks {
            for i in 0..b.token_ids.len() {
                flat.push(Element {
                    kind: b.kind,
                    token_id: b.token_ids[i],
                    position: b.positions[i],
                    pcf: b.pcf.map(|p| tape.value(p).row(i).to_vec()).unwrap_or_else(|| vec![0.0; d]),
                    token: tape.value(b.token).row(i).to_vec(),
                    seq_pos: tape.value(b.position).row(i).to_vec(),
                });
            }
        }
        let elements = built.order.iter().map(|&i| flat[i].clone()).collect();
        Ok(ElementSequence { elements, attention_mask: built.mask })
    }
}
