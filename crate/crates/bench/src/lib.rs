//! Criterion benchmarks for the planner live in `benches/`.
