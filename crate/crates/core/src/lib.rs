//! Midicoth: a lossless byte-stream compressor.
//!
//! Every byte is predicted by a fixed cascade of online models and coded
//! with a 32-bit arithmetic coder:
//!
//! 1. [`ppm`]: order-0..4 PPM with Jeffreys prior, escape method C and
//!    exclusion. It also reports the confidence and order of the matched
//!    context.
//! 2. [`match_model`]: long-range repetition predictor over hashed contexts
//!    of length 4, 6, 8, 12 and 16.
//! 3. [`word`]: trie continuation and word-bigram predictor.
//! 4. [`highctx`]: order-5..8 count model with minimal smoothing.
//! 5. [`tweedie`]: multi-step binary-tree denoiser driven by nonparametric
//!    calibration tables with James-Stein shrinkage.
//!
//! [`codec`] wires the cascade to the coder and owns the container format.

pub mod arith;
pub mod codec;
pub mod corpus;
pub mod fnv;
pub mod highctx;
pub mod match_model;
pub mod ppm;
pub mod prob;
pub mod table;
pub mod tweedie;
pub mod word;

pub use codec::{
    compress, decompress, layer_bit_accounting, stage_accounting, AblationRow, Compressor,
    Container, Decompressor, Error, Pipeline, PipelineConfig, Stage, StageReport,
};
pub use prob::{CumFreqTable, Distribution, PredictionMeta};
