//! Ensemble multi-source domain adaptation with pseudolabels.
//!
//! Several labeled source domains and one unlabeled target domain are
//! aligned by matching class-conditional feature moments, with target classes
//! taken from confident pseudolabels. An ensemble of feature extractors is
//! kept diverse by an auxiliary classifier that identifies which extractor
//! produced a feature; a final classifier reads their concatenated output.

pub mod analysis;
pub mod autodiff;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod objective;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
