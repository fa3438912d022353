//! Benchmark-only crate; see `benches/core_benches.rs` for the suite.
//!
//! The library target is intentionally empty — it exists so the bench
//! target has a package to live in without touching the core crate's
//! dependency set.
