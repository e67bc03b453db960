//! Checkpoint directory: `manifest.txt` (configuration plus one
//! `tensor <name> <rows> <cols> <byte offset>` line per parameter),
//! `tensors.bin` (little-endian f32), `tokens.txt` and `answers.txt`.

use std::fs;
use std::path::Path;

use super::{Ablation, FusionConfig, FusionModel};
use crate::dataset::AnswerVocabulary;
use crate::error::{Error, Result};
use crate::linguistic::TokenVocabulary;
use crate::nn::{ParamStore, Tensor};

const MAGIC: &str = "scanqa-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: FusionModel,
    pub tokens: TokenVocabulary,
    pub answers: AnswerVocabulary,
    pub ablation: Ablation,
}

pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = ckpt.model.config();
    let mut manifest = format!(
        "{MAGIC}\nablation {}\nd_h {}\nlayers {}\nheads {}\nff {}\nd_model {}\nf_g {}\nf_a {}\nmax_positions {}\n",
        ckpt.ablation, cfg.d_h, cfg.layers, cfg.heads, cfg.ff, cfg.d_model, cfg.f_g, cfg.f_a, cfg.max_positions
    );
    let store = ckpt.model.params();
    let mut bin = Vec::with_capacity(store.numel() * 4);
    for id in store.ids() {
        let t = store.get(id);
        manifest.push_str(&format!("tensor {} {} {} {}\n", store.name(id), t.rows(), t.cols(), bin.len()));
        for v in t.data() {
            bin.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    write("manifest.txt", manifest.as_bytes())?;
    write("tensors.bin", &bin)?;
    ckpt.tokens.save(&dir.join("tokens.txt"))?;
    ckpt.answers.save(&dir.join("answers.txt"))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let mpath = dir.join("manifest.txt");
    let manifest = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let bpath = dir.join("tensors.bin");
    let bin = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;

    let mut lines = manifest.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(MAGIC) {
        return Err(Error::Parse { line: 1, message: format!("expected {MAGIC:?}") });
    }
    let mut cfg = FusionConfig::default();
    let mut ablation = Ablation::Full;
    let mut store = ParamStore::new();
    for (i, line) in lines {
        let err = |message: String| Error::Parse { line: i + 1, message };
        let parts: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number {s:?}")));
        match parts.as_slice() {
            [] => {}
            ["ablation", a] => ablation = a.parse()?,
            ["tensor", name, rows, cols, offset] => {
                let (rows, cols, offset) = (num(rows)?, num(cols)?, num(offset)?);
                let end = offset + rows * cols * 4;
                let bytes = bin.get(offset..end).ok_or_else(|| err(format!("tensor {name} overruns tensors.bin")))?;
                let data =
                    bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))).collect();
                store.add(*name, Tensor::from_vec(rows, cols, data));
            }
            [key, value] => {
                let v = num(value)?;
                match *key {
                    "d_h" => cfg.d_h = v,
                    "layers" => cfg.layers = v,
                    "heads" => cfg.heads = v,
                    "ff" => cfg.ff = v,
                    "d_model" => cfg.d_model = v,
                    "f_g" => cfg.f_g = v,
                    "f_a" => cfg.f_a = v,
                    "max_positions" => cfg.max_positions = v,
                    other => return Err(err(format!("unknown key {other:?}"))),
                }
            }
            _ => return Err(err(format!("unrecognized line {line:?}"))),
        }
    }
    let model = FusionModel::from_store(cfg, store)?;
    let tokens = TokenVocabulary::load(&dir.join("tokens.txt"))?;
    let answers = AnswerVocabulary::load(&dir.join("answers.txt"))?;
    if tokens.len() != model.token_vocab_size() || answers.len() != model.num_answers() {
        return Err(Error::Validation("checkpoint vocabularies do not match the model's tables".into()));
    }
    Ok(Checkpoint { model, tokens, answers, ablation })
}
