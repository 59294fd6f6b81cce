//! Criterion benchmarks of the per-sample separation step; see `benches/`.
