//! Monte Carlo harness: empirical rejection rates of the four tests on the
//! simulated models, with per-run seeds derived from a master seed so runs
//! can execute on any number of threads without changing the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{gcv_select, gcv_select_variance, mv_default_grid, mv_select};
use crate::cusum::{
    classical_correlation_test, classical_variance_test, cusum_variance_statistic, BootstrapConfig,
    CorrelationTestSettings, VarianceTestSettings,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelId, KernelSpec};
use crate::relevant::{relevant_correlation_test, relevant_variance_test, RelevantTestSettings};
use crate::series::TimeSeries;
use crate::sim::{mix_seed, simulate, ModelId, PlsModelSpec};
use crate::smoothing::{local_linear_fit, residuals, VarianceVariant};

const SIM_DOMAIN: u64 = 0x7369_6d75_6c61_7465;
const BOOT_DOMAIN: u64 = 0x6273_7472_6170_7365;

fn run_seed(master: u64, domain: u64, run: u64) -> u64 {
    mix_seed(mix_seed(master, domain), run)
}

/// Which test a study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    ClassicalVariance,
    ClassicalCorrelation,
    RelevantVariance,
    RelevantCorrelation,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::ClassicalVariance => "classical-variance",
            TestKind::ClassicalCorrelation => "classical-correlation",
            TestKind::RelevantVariance => "relevant-variance",
            TestKind::RelevantCorrelation => "relevant-correlation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variance" | "classical-variance" => Some(TestKind::ClassicalVariance),
            "correlation" | "classical-correlation" => Some(TestKind::ClassicalCorrelation),
            "relevant-variance" => Some(TestKind::RelevantVariance),
            "relevant-correlation" => Some(TestKind::RelevantCorrelation),
            _ => None,
        }
    }

    /// The test each model exercises in the simulation study.
    pub fn default_for_model(model: ModelId) -> TestKind {
        match model {
            ModelId::I | ModelId::II | ModelId::IPrime => TestKind::ClassicalVariance,
            ModelId::III | ModelId::IIPrime => TestKind::RelevantVariance,
            ModelId::IV | ModelId::V | ModelId::IIIPrime => TestKind::ClassicalCorrelation,
            ModelId::VI | ModelId::IVPrime => TestKind::RelevantCorrelation,
        }
    }

    pub fn is_relevant(self) -> bool {
        matches!(
            self,
            TestKind::RelevantVariance | TestKind::RelevantCorrelation
        )
    }

    pub fn is_correlation(self) -> bool {
        matches!(
            self,
            TestKind::ClassicalCorrelation | TestKind::RelevantCorrelation
        )
    }
}

impl std::str::FromStr for TestKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        TestKind::parse(s).ok_or_else(|| format!("unknown test '{s}'"))
    }
}

/// How a bandwidth is chosen in each run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    Fixed(f64),
    MinimalVolatility,
    CrossValidation,
}

impl BandwidthRule {
    pub fn label(&self) -> String {
        match self {
            BandwidthRule::Fixed(b) => format!("{b}"),
            BandwidthRule::MinimalVolatility => "mv".into(),
            BandwidthRule::CrossValidation => "gcv".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mv" => Some(BandwidthRule::MinimalVolatility),
            "gcv" | "cv" => Some(BandwidthRule::CrossValidation),
            other => other.parse::<f64>().ok().map(BandwidthRule::Fixed),
        }
    }
}

/// The per-model relevance margin used at the boundary of the null.
pub fn default_delta(test: TestKind) -> f64 {
    match test {
        TestKind::RelevantVariance => 1.0 / 64.0,
        TestKind::RelevantCorrelation => 0.2,
        _ => 0.0,
    }
}

/// Configuration of one simulation study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub spec: PlsModelSpec,
    pub test: TestKind,
    pub n: usize,
    pub runs: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub lag: usize,
    /// Relevance margin for the relevant tests.
    pub delta: f64,
    pub mean_rule: BandwidthRule,
    pub var_rule: BandwidthRule,
    pub window: Option<usize>,
    pub kernel: KernelId,
}

impl StudyConfig {
    pub fn new(spec: PlsModelSpec, n: usize, runs: usize, replicates: usize, seed: u64) -> Self {
        let test = TestKind::default_for_model(spec.model);
        StudyConfig {
            spec,
            test,
            n,
            runs,
            replicates,
            seed,
            alphas: vec![0.05, 0.10],
            lag: 1,
            delta: default_delta(test),
            mean_rule: if test.is_correlation() {
                BandwidthRule::CrossValidation
            } else {
                BandwidthRule::MinimalVolatility
            },
            var_rule: BandwidthRule::CrossValidation,
            window: None,
            kernel: KernelId::Epanechnikov,
        }
    }

    pub fn with_test(mut self, test: TestKind) -> Self {
        self.test = test;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }
}

/// One row of the rejection table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub alpha: f64,
    pub rejection_rate: f64,
    /// Binomial Monte Carlo standard error sqrt(p(1-p)/runs).
    pub standard_error: f64,
}

/// Empirical rejection rates of one study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub model: String,
    pub test: String,
    pub n: usize,
    pub runs: usize,
    pub replicates: usize,
    pub seed: u64,
    pub lag: Option<usize>,
    pub delta: Option<f64>,
    pub mean_bandwidth_rule: String,
    pub var_bandwidth_rule: Option<String>,
    /// Runs whose locator landed on an endpoint, counted as non-rejections.
    pub endpoint_failures: usize,
    pub rows: Vec<StudyRow>,
}

/// Resolve the mean bandwidth for one simulated path.
fn resolve_mean_bandwidth(
    series: &TimeSeries,
    rule: BandwidthRule,
    kernel: &KernelSpec,
) -> Result<f64> {
    match rule {
        BandwidthRule::Fixed(b) => Ok(b),
        BandwidthRule::MinimalVolatility => {
            let grid = mv_default_grid();
            let sel = mv_select(&grid, |b| {
                let fit = local_linear_fit(series, b, kernel)?;
                let res = residuals(series, &fit)?;
                Ok(cusum_variance_statistic(&res))
            })?;
            Ok(sel.bandwidth)
        }
        BandwidthRule::CrossValidation => Ok(gcv_select(series, kernel)?.bandwidth),
    }
}

fn resolve_var_bandwidth(
    series: &TimeSeries,
    mean_bandwidth: f64,
    rule: BandwidthRule,
    kernel: &KernelSpec,
) -> Result<f64> {
    match rule {
        BandwidthRule::Fixed(c) => Ok(c),
        BandwidthRule::CrossValidation => {
            let fit = local_linear_fit(series, mean_bandwidth, kernel)?;
            let res = residuals(series, &fit)?;
            Ok(gcv_select_variance(&res, kernel)?.bandwidth)
        }
        BandwidthRule::MinimalVolatility => Err(Error::InvalidParameter(
            "minimal volatility is not defined for the variance bandwidth".into(),
        )),
    }
}

/// Run one simulated path through the configured test; returns the per-alpha
/// rejections.
pub fn run_one(cfg: &StudyConfig, run: u64) -> Result<Vec<bool>> {
    let series = simulate(&cfg.spec, cfg.n, run_seed(cfg.seed, SIM_DOMAIN, run))?;
    let kernel = KernelSpec::new(cfg.kernel);
    let bootstrap = BootstrapConfig {
        window: cfg.window,
        replicates: cfg.replicates,
        seed: run_seed(cfg.seed, BOOT_DOMAIN, run),
        alphas: cfg.alphas.clone(),
    };
    let b = resolve_mean_bandwidth(&series, cfg.mean_rule, &kernel)?;
    match cfg.test {
        TestKind::ClassicalVariance => {
            let settings = VarianceTestSettings {
                mean_bandwidth: b,
                kernel: cfg.kernel,
                bootstrap,
            };
            let report = classical_variance_test(&series, &settings)?;
            Ok(report.decisions.iter().map(|d| d.reject).collect())
        }
        TestKind::ClassicalCorrelation => {
            let c = resolve_var_bandwidth(&series, b, cfg.var_rule, &kernel)?;
            let settings = CorrelationTestSettings {
                lag: cfg.lag,
                mean_bandwidth: b,
                var_bandwidth: c,
                variant: VarianceVariant::Piecewise,
                locator_window: None,
                zeta: crate::cusum::DEFAULT_ZETA,
                kernel: cfg.kernel,
                bootstrap,
            };
            let report = classical_correlation_test(&series, &settings)?;
            Ok(report.decisions.iter().map(|d| d.reject).collect())
        }
        TestKind::RelevantVariance => {
            let mut settings = RelevantTestSettings::variance(b);
            settings.kernel = cfg.kernel;
            settings.bootstrap = bootstrap;
            let report = relevant_variance_test(&series, cfg.delta, &settings)?;
            Ok(report.decisions.iter().map(|d| d.reject).collect())
        }
        TestKind::RelevantCorrelation => {
            let c = resolve_var_bandwidth(&series, b, cfg.var_rule, &kernel)?;
            let mut settings = RelevantTestSettings::correlation(b, c);
            settings.kernel = cfg.kernel;
            settings.bootstrap = bootstrap;
            let report = relevant_correlation_test(&series, cfg.lag, cfg.delta, &settings)?;
            Ok(report.decisions.iter().map(|d| d.reject).collect())
        }
    }
}

/// Run the whole study, parallel over runs.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.runs < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 runs, got {}",
            cfg.runs
        )));
    }
    // A relevant test refuses to run when its locator lands on an endpoint
    // of the sample; such runs count as non-rejections.
    let outcomes: Vec<Option<Vec<bool>>> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|run| match run_one(cfg, run) {
            Ok(rejections) => Ok(Some(rejections)),
            Err(Error::EndpointChangePoint { .. }) => Ok(None),
            Err(other) => Err(other),
        })
        .collect::<Result<Vec<_>>>()?;
    let endpoint_failures = outcomes.iter().filter(|o| o.is_none()).count();
    let rows = cfg
        .alphas
        .iter()
        .enumerate()
        .map(|(ix, &alpha)| {
            let hits = outcomes
                .iter()
                .filter(|o| o.as_ref().is_some_and(|r| r[ix]))
                .count();
            let rate = hits as f64 / cfg.runs as f64;
            StudyRow {
                alpha,
                rejection_rate: rate,
                standard_error: (rate * (1.0 - rate) / cfg.runs as f64).sqrt(),
            }
        })
        .collect();
    Ok(StudyResult {
        model: cfg.spec.model.name().into(),
        test: cfg.test.name().into(),
        n: cfg.n,
        runs: cfg.runs,
        replicates: cfg.replicates,
        seed: cfg.seed,
        lag: cfg.test.is_correlation().then_some(cfg.lag),
        delta: cfg.test.is_relevant().then_some(cfg.delta),
        mean_bandwidth_rule: cfg.mean_rule.label(),
        var_bandwidth_rule: cfg.test.is_correlation().then(|| cfg.var_rule.label()),
        endpoint_failures,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_seeds_are_distinct_across_domains() {
        assert_ne!(run_seed(1, SIM_DOMAIN, 0), run_seed(1, BOOT_DOMAIN, 0));
        assert_ne!(run_seed(1, SIM_DOMAIN, 0), run_seed(1, SIM_DOMAIN, 1));
    }

    #[test]
    fn default_tests_follow_the_model_assignment() {
        assert_eq!(
            TestKind::default_for_model(ModelId::I),
            TestKind::ClassicalVariance
        );
        assert_eq!(
            TestKind::default_for_model(ModelId::III),
            TestKind::RelevantVariance
        );
        assert_eq!(
            TestKind::default_for_model(ModelId::V),
            TestKind::ClassicalCorrelation
        );
        assert_eq!(
            TestKind::default_for_model(ModelId::IVPrime),
            TestKind::RelevantCorrelation
        );
    }

    #[test]
    fn studies_require_a_minimum_run_count() {
        let spec = PlsModelSpec::new(ModelId::I, None).unwrap();
        let cfg = StudyConfig::new(spec, 100, 50, 199, 0);
        assert!(run_study(&cfg).is_err());
    }

    #[test]
    fn single_run_is_reproducible() {
        let spec = PlsModelSpec::new(ModelId::I, None).unwrap();
        let mut cfg = StudyConfig::new(spec, 120, 100, 199, 42);
        cfg.mean_rule = BandwidthRule::Fixed(0.15);
        let a = run_one(&cfg, 3).unwrap();
        let b = run_one(&cfg, 3).unwrap();
        assert_eq!(a, b);
    }
}
