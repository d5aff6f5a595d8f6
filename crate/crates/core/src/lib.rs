//! Binary hash codes for implicit-feedback recommendation.
//!
//! Users and items are mapped to `r`-bit codes by alternating discrete
//! optimization of a pairwise least-squares ranking loss, coupled with a
//! denoising autoencoder over item text so unseen items can be coded from
//! content alone. Retrieval ranks items by Hamming distance to the user code.
//!
//! The crate is split into:
//!
//! * [`model`]: feedback sets, packed codes, delegate matrices, and the
//!   preference / AUC / objective arithmetic.
//! * [`data`]: CSV and JSON-lines ingestion, tokenization, TF-IDF, and
//!   sparsity / cold-start splits.
//! * [`dae`]: the denoising autoencoder (pretraining, finetuning, encoding).
//! * [`solver`]: discrete coordinate descent for codes, SVD projection for
//!   delegates, and the outer alternating loop.
//! * [`retrieval`]: Hamming top-k, the Accuracy@k / MRR protocol and the
//!   Hamming-vs-float benchmark.
//! * [`artifact`]: the binary model container.

pub mod artifact;
pub mod dae;
pub mod data;
mod error;
pub mod model;
pub mod retrieval;
pub mod solver;

pub use error::{DphError, Result};
