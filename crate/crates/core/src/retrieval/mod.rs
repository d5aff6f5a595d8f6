//! Hamming-space ranking, cold-item codes, the sampled-negative evaluation
//! protocol and the binary-vs-float retrieval benchmark.

mod bench;
mod cold;
mod eval;
mod ranking;

pub use bench::{bench_retrieval, BenchConfig, BenchReport, BenchRow, Representation};
pub use cold::{encode_cold_item, encode_cold_items};
pub use eval::{
    evaluate, evaluate_cases, heldout_auc, EvalReport, EvalSettings, EvalTag, EvalReports,
};
pub use ranking::{topk, topk_dot, RankedList};
