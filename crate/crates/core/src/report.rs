//! Serializable result types for the four tests.

use serde::{Deserialize, Serialize};

/// A change-point estimate carried inside a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangePointSummary {
    /// Which locator produced the estimate.
    pub method: String,
    /// One-based grid index.
    pub index: usize,
    /// index / n.
    pub fraction: f64,
    /// Objective value at the maximizer (contrast or squared drift).
    pub objective: f64,
}

/// Every tuning parameter that influenced a run, recorded so the report is
/// self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tuning {
    pub mean_bandwidth: f64,
    pub mean_bandwidth_source: String,
    pub var_bandwidth: Option<f64>,
    pub var_bandwidth_source: Option<String>,
    /// Block window of the multiplier bootstrap.
    pub window: usize,
    /// Window of the variance-break locator, when one ran.
    pub locator_window: Option<usize>,
    pub zeta: Option<f64>,
    pub kernel: String,
    pub replicates: usize,
    pub seed: u64,
    pub lag: Option<usize>,
    pub variance_variant: Option<String>,
}

/// Decision of a classical test at one level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaDecision {
    pub alpha: f64,
    /// Bootstrap order statistic at floor(B * (1 - alpha)).
    pub critical_value: f64,
    /// True iff statistic > critical_value.
    pub reject: bool,
}

/// Report of a classical (no change vs. some change) test.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestReport {
    pub test: String,
    pub n: usize,
    /// Normalized CUSUM statistic.
    pub statistic: f64,
    pub decisions: Vec<AlphaDecision>,
    /// 1 - B*/B with B* the number of bootstrap replicates at or below the
    /// statistic.
    pub p_value: f64,
    /// Variance-break location when the piecewise variance estimate ran.
    pub change_point: Option<ChangePointSummary>,
    pub tuning: Tuning,
}

impl TestReport {
    pub fn reject_at(&self, alpha: f64) -> Option<bool> {
        self.decisions
            .iter()
            .find(|d| d.alpha == alpha)
            .map(|d| d.reject)
    }
}

/// Segment means of the tested quantity before and after the estimated
/// change point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaEstimate {
    pub before: f64,
    pub after: f64,
    /// after - before.
    pub delta: f64,
}

/// Decision of a relevant-change test at one level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevantAlphaDecision {
    pub alpha: f64,
    /// Bootstrap order statistic at floor(B * (1 - alpha)).
    pub bootstrap_quantile: f64,
    /// delta^2 + quantile * delta / sqrt(n).
    pub threshold: f64,
    /// True iff statistic > threshold.
    pub reject: bool,
}

/// Report of a relevant-change test (null: |change| <= delta).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevantTestReport {
    pub test: String,
    pub n: usize,
    /// Normalized L2 statistic.
    pub statistic: f64,
    /// The relevance margin delta of the null hypothesis.
    pub delta_threshold: f64,
    pub delta_estimate: DeltaEstimate,
    pub change_point: ChangePointSummary,
    /// Variance-break location feeding the piecewise variance estimate
    /// (correlation test only).
    pub variance_break: Option<ChangePointSummary>,
    pub decisions: Vec<RelevantAlphaDecision>,
    pub p_value: f64,
    pub tuning: Tuning,
}

impl RelevantTestReport {
    pub fn reject_at(&self, alpha: f64) -> Option<bool> {
        self.decisions
            .iter()
            .find(|d| d.alpha == alpha)
            .map(|d| d.reject)
    }
}
