//! Scenario handling and the benchmark harness behind the `kinoplan` binary.

pub mod bench;
pub mod scenario;
