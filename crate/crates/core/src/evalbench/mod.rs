//! Offline metrics, evaluation reports and the latency benchmark harness.

pub mod bench;
pub mod eval;
pub mod metrics;

pub use bench::{
    bench_latency, config_hash, short_hash, BenchConfig, Comparison, LatencyReport, LatencyRow, LatencyStats,
    DEFAULT_WARMUP, MIN_SAMPLES,
};
pub use eval::{
    check_vocabulary, eval_autocomplete, eval_intent, eval_ranker, eval_suggest, eval_tagger, EvalReport, Task,
};
pub use metrics::{accuracy, mrr_at_10, ndcg_at, ndcg_at_10, percentile, reciprocal_rank};
