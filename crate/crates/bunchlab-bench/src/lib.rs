//! Benchmark-only package; see `benches/engines.rs`.
