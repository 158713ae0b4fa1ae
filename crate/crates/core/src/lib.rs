//! Contact-complexity scoring for customer-service chat transcripts.
//!
//! A TF-IDF + gradient-boosted-trees classifier (the expert) predicts each
//! contact's issue code. Three hypotheses are read off each contact: agent
//! turn count `L`, entropy `E` of the expert's prediction, and skillfulness
//! `S`, the summed KL divergence between the staged and final predictions.
//! They are normalized by quantile maps, combined into an absolute score `C`
//! and mapped to a relative score `Q` in `[0, 1]` used for routing.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod expert;
pub mod gbdt;
pub mod introspect;
pub mod model_file;
pub mod quantiles;
pub mod routing;
pub mod scoring;
pub mod synth;
pub mod textfeat;
pub mod transcript;

pub use error::{Error, Result};
