//! Criterion benchmarks for the numerical kernels.
