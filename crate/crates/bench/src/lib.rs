//! Benchmarks for `rmhmc-core` live in `benches/`.
