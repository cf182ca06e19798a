//! Criterion benchmarks for the fqra solvers live in `benches/`.
