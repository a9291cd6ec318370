//! Information-theoretic analyses of language-model embeddings.
//!
//! - [`entropy`]: log-det entropy of token representations and its normalization.
//! - [`scaling_sim`]: skill-graph simulator behind the entropy scaling laws.
//! - [`infogain`]: GP information gain along a token sequence and its ridge identity.
//! - [`token_select`]: Lasso versus attention for picking informative context tokens.
//! - [`covdist`]: sentence summaries and distances between covariance matrices.
//! - [`tensor_io`]: the `EMB1` tensor format and JSON token sidecars.

pub mod covdist;
pub mod entropy;
pub mod error;
pub mod infogain;
pub mod linalg;
pub mod plot;
pub mod powersum;
pub mod scaling_sim;
pub mod selftest;
pub mod synth;
pub mod tensor_io;
pub mod token_select;

pub use error::{Error, Result};
