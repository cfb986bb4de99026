//! Criterion benchmarks for carebn; see `benches/`.
