//! Benchmarks for `lensrl`; see `benches/lensrl.rs`.
