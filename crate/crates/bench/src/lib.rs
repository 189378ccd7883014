//! Criterion benchmarks for `palmvein-core`. See `benches/kernels.rs`.
