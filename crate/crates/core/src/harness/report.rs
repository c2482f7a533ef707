//! Run configuration and machine-readable validation reports.

use serde::{Deserialize, Serialize};

/// Statistical tolerances shared by the suites.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// Pass band for moment/Laplace checks, in standard errors.
    pub se_multiplier: f64,
    /// KS threshold coefficient (statistic ≤ coeff/√n).
    pub ks_coefficient: f64,
    /// Residual tolerance for root/algebra identities.
    pub residual_tol: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        ToleranceProfile {
            se_multiplier: 3.0,
            ks_coefficient: 1.63,
            residual_tol: 1e-10,
        }
    }
}

/// Configuration of one validation run.
///
/// Identical (master_seed, replicates) produce identical reports regardless
/// of worker count: every replicate owns a counter-derived stream and the
/// aggregation is a sequential fold over the ordered replicate results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub master_seed: u64,
    pub replicates: usize,
    pub worker_count: usize,
    pub tolerance: ToleranceProfile,
    /// Scale multiplier for the heavyweight fragmentation criterion
    /// (1.0 = the acceptance-grade run).
    pub crt_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            master_seed: 42,
            replicates: 100_000,
            worker_count: 0,
            tolerance: ToleranceProfile::default(),
            crt_scale: 1.0,
        }
    }
}

/// One validation check. The serialized form deliberately excludes the
/// wall-clock runtime so that reports are byte-identical across reruns with
/// the same seed; runtimes are carried separately for console display.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Check id, e.g. "mass/sigma-a-gamma".
    pub test_id: String,
    /// Which closed-form law the check validates.
    pub reference: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub sample_size: u64,
    /// Exact closed-form reference values used in the check.
    pub reference_values: Vec<(String, f64)>,
    #[serde(skip)]
    pub runtime_ms: u128,
}

impl ValidationReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Render reports as JSON lines (the byte-stable artifact).
pub fn to_json_lines(reports: &[ValidationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}
