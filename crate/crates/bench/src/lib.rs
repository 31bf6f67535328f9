//! Criterion benchmarks for the spectral and message-passing kernels; see
//! `benches/kernels.rs`.
