//! Benchmarks live in `benches/`; run `cargo bench -p ltrans-bench`.
