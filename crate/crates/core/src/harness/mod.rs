//! Statistical validation engine: empirical transforms with standard errors,
//! KS and chi-square tests, deterministic replicate streams, and the
//! machine-readable suite runner behind `crt-prune validate`.

pub mod report;
pub mod stats;
pub mod suites;

pub use report::{SimConfig, ToleranceProfile, ValidationReport};
pub use stats::{empirical_laplace, ks_test, ks_two_sample, KsOutcome, LaplaceEstimate};
pub use suites::{run_suite, Suite};
