//! Criterion benchmarks for the tagging, scoring and correlation stages.
//! Run with `cargo bench -p urbanpulse-bench`.
