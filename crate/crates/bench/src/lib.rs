//! Criterion benchmarks for the estimator, trace synthesis and sweeps; see `benches/pipeline.rs`.
