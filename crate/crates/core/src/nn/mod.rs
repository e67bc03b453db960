//! Minimal dense-matrix autodiff used by the encoders and the fusion model.

mod params;
mod tape;
mod tensor;

pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{cross_entropy_value, gelu, gelu_derivative, softmax_in_place, Backward, Tape, Var};
pub use tensor::Tensor;
