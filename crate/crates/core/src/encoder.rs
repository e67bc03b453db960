//! Permutation-invariant point-set encoder.
//!
//! Each point goes through two affine + GELU layers; pooling over points
//! (max or mean) happens in the caller. This stands in for a full point
//! backbone while keeping per-point features addressable by index.

use rand::Rng;

use crate::nn::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct PointSetEncoder {
    input_dim: usize,
    width: usize,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

impl PointSetEncoder {
    /// Registers the encoder's parameters under `prefix` and initializes the
    /// weights with He-style scaling so features keep a useful range at
    /// initialization.
    pub fn new<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, width: usize, rng: &mut R) -> Self {
        let w1 = store.add_normal(&format!("{prefix}.w1"), input_dim, width, (2.0 / input_dim as f64).sqrt(), rng);
        let b1 = store.add_normal(&format!("{prefix}.b1"), 1, width, 0.1, rng);
        let w2 = store.add_normal(&format!("{prefix}.w2"), width, width, (2.0 / width as f64).sqrt(), rng);
        let b2 = store.add_normal(&format!("{prefix}.b2"), 1, width, 0.1, rng);
        PointSetEncoder {
            input_dim,
            width,
            w1,
            b1,
            w2,
            b2,
        }
    }

    /// Re-binds an encoder to parameters already present in `store`.
    pub fn from_store(store: &ParamStore, prefix: &str) -> Option<Self> {
        let w1 = store.find(&format!("{prefix}.w1"))?;
        let b1 = store.find(&format!("{prefix}.b1"))?;
        let w2 = store.find(&format!("{prefix}.w2"))?;
        let b2 = store.find(&format!("{prefix}.b2"))?;
        let (input_dim, width) = store.get(w1).shape();
        Some(PointSetEncoder {
            input_dim,
            width,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Feature width per point.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn param_ids(&self) -> [ParamId; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }

    /// Per-point features for an `N x input_dim` node.
    pub fn per_point(&self, tape: &mut Tape, x: Var) -> Var {
        let h = tape.affine(x, self.w1, self.b1);
        let h = tape.gelu(h);
        let h = tape.affine(h, self.w2, self.b2);
        tape.gelu(h)
    }

    /// Per-point features evaluated outside any training graph.
    pub fn per_point_values(&self, params: &ParamStore, x: Tensor) -> Tensor {
        let mut tape = Tape::new(params);
        let x = tape.input(x);
        let out = self.per_point(&mut tape, x);
        tape.value(out).clone()
    }
}
