//! Criterion benchmarks for the simulator and policy network; see `benches/`.
