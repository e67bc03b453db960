//! Question answering over colored point-cloud scenes.

pub mod appearance;
pub mod cli;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod linguistic;
pub mod nn;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
