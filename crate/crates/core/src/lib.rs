//! Residual listwise re-ranking.
//!
//! A pointwise scorer assigns each candidate a score in isolation. This crate
//! adds a small listwise correction on top: one multi-head self-attention block
//! over the candidates' embeddings, a per-item MLP that emits a delta score, and
//! a learnable gate `alpha` (initialised to zero) that mixes the delta into the
//! pointwise score:
//!
//! ```text
//! H_ctx   = LayerNorm(H + MHSA(H))
//! delta_i = MLP(H_ctx[i])
//! final_i = point_i + alpha * delta_i
//! ```
//!
//! The head is trained with an NDCG-weighted pairwise logistic loss whose pair
//! weights are recomputed from the current ranking and held constant during
//! differentiation.
//!
//! # Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`types`] | candidate lists, configuration, evaluation reports |
//! | [`params`] | model parameters and seeded initialisation |
//! | [`metrics`] | gain/discount, NDCG@k, Spearman, Kendall tau-b, pairwise accuracy |
//! | [`encoder`] | forward pass with activation cache |
//! | [`training`] | loss, reverse-mode gradients, AdamW, sampling, cross-validation, fit |
//! | [`bm25`] | Okapi BM25 and the identity pointwise ranker |
//! | [`eval`] | per-list and aggregate evaluation |
//!
//! The crate is `no_std` (with `alloc`); everything touching files, clocks or
//! the terminal lives in the `resrank` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod bm25;
pub mod encoder;
mod error;
pub mod eval;
pub mod metrics;
pub mod params;
pub mod tensor;
pub mod training;
pub mod types;

pub use error::{Error, Result};
pub use params::{init_params, ModelParams};
pub use tensor::Matrix;
pub use types::{CandidateList, EvalReport, ReviewItem, TrainConfig};
