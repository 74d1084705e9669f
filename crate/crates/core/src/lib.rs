//! Retrieval fusion and evaluation toolkit: TREC run ingestion, nDCG /
//! recall / judged metrics, min-max normalized sum fusion, exhaustive and
//! greedy ensemble subset search, reranker application with depth sweeps,
//! desk-scale first-stage retrievers, and judgment-coverage analysis.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod leaderboard;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rerank;
pub mod retrievers;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
pub use metrics::{EvalReport, Gain, Metric};
pub use model::{Qrels, Run, ScoredDoc};
