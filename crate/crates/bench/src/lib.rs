//! Criterion benchmarks for the core kernels live under `benches/`.
