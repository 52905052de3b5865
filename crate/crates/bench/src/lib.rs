//! Criterion benchmarks for concate-core live under `benches/`.
