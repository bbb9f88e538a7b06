//! Behavior Alignment: evaluating conversational recommenders by whether
//! their recommendation strategies match a human recommender's.
//!
//! - [`corpus`]: dialogue, response, preference and sentence-pair files.
//! - [`behavior`]: explicit Behavior Alignment, entropy-weighted variant,
//!   recommendation statistics.
//! - [`text`]: BLEU@K and DIST@K baselines.
//! - [`agreement`]: metric-vs-human agreement with bootstrap intervals.
//! - [`pairs`]: the same-behavior pair classifier used for implicit Behavior
//!   Alignment, hard-negative mining and cross-validation.
//! - [`synth`]: synthetic systems blended from preferred and dispreferred
//!   responses.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agreement;
pub mod behavior;
pub mod corpus;
mod error;
pub mod pairs;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
