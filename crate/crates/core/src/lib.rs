//! Data-driven reduced-order models built from an atlas of overlapping charts.

pub mod atlas;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod neighbor;
pub mod neuralnet;
pub mod seed;
pub mod systems;

pub use dataset::Dataset;
pub use error::{Error, ErrorKind, Result};
pub use linalg::Matrix;
