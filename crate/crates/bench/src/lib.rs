//! Criterion benchmarks for the robust Snell engine; see `benches/`.
