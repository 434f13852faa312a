//! Classical change-point tests for the variance and the lag-k correlation,
//! with critical values from a block-multiplier (wild) bootstrap.
//!
//! The test statistic is the maximum absolute drift-corrected partial sum of
//! squared residuals (variance) or of variance-normalized residual products
//! (correlation), scaled by 1/sqrt(n). Critical values come from replicates
//! that multiply centered sliding block sums by independent standard normal
//! weights, which mimics the null distribution without estimating the
//! long-run variance.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{KernelId, KernelSpec};
use crate::numeric::floor_index;
use crate::report::{AlphaDecision, ChangePointSummary, TestReport, Tuning};
use crate::series::TimeSeries;
use crate::sim::mix_seed;
use crate::smoothing::{
    clamp_piecewise_bandwidth, local_linear_fit, residuals, variance_break_locate,
    variance_fit_piecewise, variance_fit_smooth, Residuals, VarianceFit, VarianceVariant,
};

/// Default trim for the variance-break locator.
pub const DEFAULT_ZETA: f64 = 0.016;

/// Default locator window and bootstrap block window: floor(n^(1/3)).
pub fn default_cube_root_window(n: usize) -> usize {
    floor_index((n as f64).cbrt()).max(1)
}

// ---------------------------------------------------------------------------
// Partial sums
// ---------------------------------------------------------------------------

/// A summand sequence with its left-to-right partial sums and drift-corrected
/// deviations S_i - (i/n) S_n.
#[derive(Debug, Clone)]
pub struct CusumSeries {
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl CusumSeries {
    pub fn new(values: Vec<f64>) -> Self {
        let mut prefix = vec![0.0; values.len() + 1];
        for (j, v) in values.iter().enumerate() {
            prefix[j + 1] = prefix[j] + v;
        }
        CusumSeries { values, prefix }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Partial sum over the first `i` values (one-based; `partial(0) = 0`).
    pub fn partial(&self, i: usize) -> f64 {
        self.prefix[i]
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// S_i - (i/n) S_n; exactly zero at i = n.
    pub fn drift(&self, i: usize) -> f64 {
        let n = self.values.len() as f64;
        self.prefix[i] - (i as f64 / n) * self.total()
    }

    /// Maximum absolute drift over i = 1..n and the smallest index
    /// attaining it.
    pub fn max_abs_drift(&self) -> (f64, usize) {
        let n = self.values.len();
        debug_assert!(self.drift(n) == 0.0);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 1;
        for i in 1..=n {
            let d = self.drift(i).abs();
            if d > best {
                best = d;
                arg = i;
            }
        }
        (best, arg)
    }
}

/// CUSUM statistic of the squared residuals, scaled by 1/sqrt(n).
pub fn cusum_variance_statistic(res: &Residuals) -> f64 {
    let n = res.len();
    assert!(n >= 2, "need at least 2 observations");
    let series = CusumSeries::new(res.squared());
    series.max_abs_drift().0 / (n as f64).sqrt()
}

/// Variance-normalized lag-k residual products W_i = e_i e_{i+k} / sigma2(t_i),
/// with residuals past the end of the sample read as zero.
#[derive(Debug, Clone)]
pub struct WSequence {
    pub values: Vec<f64>,
    pub lag: usize,
    pub variant: VarianceVariant,
}

pub fn w_sequence(res: &Residuals, var_fit: &VarianceFit, k: usize) -> WSequence {
    let n = res.len();
    assert!(k >= 1, "lag must be positive");
    assert!(4 * k < n, "lag {k} too large for n = {n}");
    assert_eq!(var_fit.sigma2.len(), n);
    let values = (1..=n)
        .map(|i| res.at(i) * res.at(i + k) / var_fit.sigma2[i - 1])
        .collect();
    WSequence {
        values,
        lag: k,
        variant: var_fit.variant,
    }
}

/// CUSUM statistic of the normalized lag products, scaled by 1/sqrt(n).
pub fn cusum_correlation_statistic(w: &WSequence) -> f64 {
    let n = w.values.len();
    assert!(n >= 2);
    let series = CusumSeries::new(w.values.clone());
    series.max_abs_drift().0 / (n as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Block-multiplier bootstrap
// ---------------------------------------------------------------------------

/// Centered sliding block sums d_j = S_{j,m} - (m/n) S_n for j = 1..n-m+1,
/// where S_{j,m} sums `m` consecutive values starting at j.
pub(crate) fn centered_window_sums(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    debug_assert!(m >= 1 && m <= n);
    let mut prefix = vec![0.0; n + 1];
    for (j, v) in values.iter().enumerate() {
        prefix[j + 1] = prefix[j] + v;
    }
    let center = m as f64 / n as f64 * prefix[n];
    (0..n - m + 1)
        .map(|j| prefix[j + m] - prefix[j] - center)
        .collect()
}

/// Partial sums of multiplier-weighted centered block sums, scaled by
/// 1/sqrt(m(n-m+1)).
pub(crate) fn phi_from_centered(centered: &[f64], m: usize, multipliers: &[f64]) -> Vec<f64> {
    let count = centered.len();
    let n = count + m - 1;
    let scale = 1.0 / ((m as f64) * (n as f64 - m as f64 + 1.0)).sqrt();
    let mut acc = 0.0;
    centered
        .iter()
        .zip(multipliers.iter())
        .map(|(d, r)| {
            acc += d * r;
            acc * scale
        })
        .collect()
}

/// The bootstrap partial-sum process for a summand sequence (squared
/// residuals or normalized lag products) and one draw of standard normal
/// multipliers. Returns a sequence of length n - m + 1.
pub fn bootstrap_phi(values: &[f64], m: usize, multipliers: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if m < 1 || m > n {
        return Err(Error::BadBootstrapConfig(format!(
            "window m = {m} outside 1..={n}"
        )));
    }
    if multipliers.len() != n - m + 1 {
        return Err(Error::LengthMismatch {
            left: multipliers.len(),
            right: n - m + 1,
        });
    }
    let centered = centered_window_sums(values, m);
    Ok(phi_from_centered(&centered, m, multipliers))
}

/// Maximum absolute drift-corrected bootstrap partial sum over
/// i = m+1 .. n-m+1.
pub fn bootstrap_max_statistic(phi: &[f64], m: usize, n: usize) -> Result<f64> {
    if phi.len() != n - m + 1 {
        return Err(Error::LengthMismatch {
            left: phi.len(),
            right: n - m + 1,
        });
    }
    let len = n - m + 1;
    if m + 1 > len {
        return Err(Error::BadBootstrapConfig(format!(
            "empty maximization range: m = {m}, n = {n}"
        )));
    }
    let last = phi[len - 1];
    let mut best = 0.0f64;
    for i in (m + 1)..=len {
        let dev = (phi[i - 1] - (i as f64 / len as f64) * last).abs();
        if dev > best {
            best = dev;
        }
    }
    Ok(best)
}

/// Window, replicate count, master seed and levels for the bootstrap.
#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    /// Block window m; `None` selects floor(n^(1/3)).
    pub window: Option<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            window: None,
            replicates: 2000,
            seed: 0,
            alphas: vec![0.05, 0.10],
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn resolved_window(&self, n: usize) -> usize {
        self.window.unwrap_or_else(|| default_cube_root_window(n))
    }

    /// Checks the window, replicate count and levels against the sample
    /// size; returns the resolved window.
    pub fn validate(&self, n: usize) -> Result<usize> {
        let m = self.resolved_window(n);
        if m < 2 {
            return Err(Error::BadBootstrapConfig(format!("window m = {m} < 2")));
        }
        if 2 * m >= n {
            return Err(Error::BadBootstrapConfig(format!(
                "window m = {m} must satisfy m < n/2 (n = {n})"
            )));
        }
        if self.replicates < 199 {
            return Err(Error::BadBootstrapConfig(format!(
                "need at least 199 replicates for the quantiles, got {}",
                self.replicates
            )));
        }
        if self.alphas.is_empty() {
            return Err(Error::BadBootstrapConfig("no levels requested".into()));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::BadBootstrapConfig(format!(
                    "level alpha = {a} outside (0, 1)"
                )));
            }
            if floor_index(self.replicates as f64 * (1.0 - a)) < 1 {
                return Err(Error::BadBootstrapConfig(format!(
                    "alpha = {a} needs more replicates"
                )));
            }
        }
        Ok(m)
    }
}

/// Seed of replicate `index`, derived from the master seed so replicates can
/// run in any order on any number of threads.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    mix_seed(mix_seed(master, 0x626f_6f74_7374_7261), index)
}

/// The i.i.d. standard normal multipliers a replicate draws from its seed.
pub fn normal_multipliers(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

pub(crate) fn standard_normal_draws(seed: u64, count: usize) -> Vec<f64> {
    normal_multipliers(seed, count)
}

/// One bootstrap sample of the classical max statistic.
pub(crate) fn classical_bootstrap_sample(
    values: &[f64],
    m: usize,
    replicates: usize,
    seed: u64,
) -> Vec<f64> {
    let n = values.len();
    let centered = centered_window_sums(values, m);
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let draws = standard_normal_draws(replicate_seed(seed, r as u64), n - m + 1);
            let phi = phi_from_centered(&centered, m, &draws);
            bootstrap_max_statistic(&phi, m, n).expect("validated dimensions")
        })
        .collect()
}

/// Sorts a bootstrap sample; all entries must be finite.
pub(crate) fn order_statistics(mut sample: Vec<f64>) -> Vec<f64> {
    assert!(sample.iter().all(|v| v.is_finite()));
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample
}

/// Critical values, decisions and p-value of a classical test given the
/// sorted bootstrap sample.
pub(crate) fn classical_decisions(
    statistic: f64,
    sorted: &[f64],
    alphas: &[f64],
) -> (Vec<AlphaDecision>, f64) {
    let b = sorted.len();
    let decisions = alphas
        .iter()
        .map(|&alpha| {
            let idx = floor_index(b as f64 * (1.0 - alpha)).clamp(1, b);
            let critical_value = sorted[idx - 1];
            AlphaDecision {
                alpha,
                critical_value,
                reject: statistic > critical_value,
            }
        })
        .collect();
    let below = sorted.partition_point(|&v| v <= statistic);
    let p_value = 1.0 - below as f64 / b as f64;
    (decisions, p_value)
}

// ---------------------------------------------------------------------------
// Test drivers
// ---------------------------------------------------------------------------

/// Settings for the classical variance test.
#[derive(Debug, Clone)]
pub struct VarianceTestSettings {
    pub mean_bandwidth: f64,
    pub kernel: KernelId,
    pub bootstrap: BootstrapConfig,
}

/// Classical test of a constant variance against any change.
pub fn classical_variance_test(
    series: &TimeSeries,
    settings: &VarianceTestSettings,
) -> Result<TestReport> {
    let n = series.len();
    let m = settings.bootstrap.validate(n)?;
    let kernel = KernelSpec::new(settings.kernel);
    let fit = local_linear_fit(series, settings.mean_bandwidth, &kernel)?;
    let res = residuals(series, &fit)?;
    let statistic = cusum_variance_statistic(&res);
    let sample = classical_bootstrap_sample(
        &res.squared(),
        m,
        settings.bootstrap.replicates,
        settings.bootstrap.seed,
    );
    let sorted = order_statistics(sample);
    let (decisions, p_value) = classical_decisions(statistic, &sorted, &settings.bootstrap.alphas);
    Ok(TestReport {
        test: "classical-variance".into(),
        n,
        statistic,
        decisions,
        p_value,
        change_point: None,
        tuning: Tuning {
            mean_bandwidth: settings.mean_bandwidth,
            mean_bandwidth_source: "fixed".into(),
            var_bandwidth: None,
            var_bandwidth_source: None,
            window: m,
            locator_window: None,
            zeta: None,
            kernel: settings.kernel.name().into(),
            replicates: settings.bootstrap.replicates,
            seed: settings.bootstrap.seed,
            lag: None,
            variance_variant: None,
        },
    })
}

/// Settings for the classical correlation test.
#[derive(Debug, Clone)]
pub struct CorrelationTestSettings {
    pub lag: usize,
    pub mean_bandwidth: f64,
    pub var_bandwidth: f64,
    /// Smooth when a variance break can be excluded, piecewise otherwise.
    pub variant: VarianceVariant,
    /// Locator window; `None` selects floor(n^(1/3)). Piecewise only.
    pub locator_window: Option<usize>,
    pub zeta: f64,
    pub kernel: KernelId,
    pub bootstrap: BootstrapConfig,
}

impl CorrelationTestSettings {
    pub fn new(lag: usize, mean_bandwidth: f64, var_bandwidth: f64) -> Self {
        CorrelationTestSettings {
            lag,
            mean_bandwidth,
            var_bandwidth,
            variant: VarianceVariant::Piecewise,
            locator_window: None,
            zeta: DEFAULT_ZETA,
            kernel: KernelId::Epanechnikov,
            bootstrap: BootstrapConfig::default(),
        }
    }
}

/// Classical test of a constant lag-k correlation against any change.
pub fn classical_correlation_test(
    series: &TimeSeries,
    settings: &CorrelationTestSettings,
) -> Result<TestReport> {
    let n = series.len();
    let k = settings.lag;
    if k < 1 || 4 * k >= n {
        return Err(Error::InvalidParameter(format!(
            "lag {k} out of range for n = {n}"
        )));
    }
    let m = settings.bootstrap.validate(n)?;
    let kernel = KernelSpec::new(settings.kernel);
    let fit = local_linear_fit(series, settings.mean_bandwidth, &kernel)?;
    let res = residuals(series, &fit)?;
    let mut change_point = None;
    let mut locator_window = None;
    let mut zeta = None;
    let var_fit = match settings.variant {
        VarianceVariant::Smooth => variance_fit_smooth(&res, settings.var_bandwidth, &kernel)?,
        VarianceVariant::Piecewise => {
            let window = settings
                .locator_window
                .unwrap_or_else(|| default_cube_root_window(n));
            let loc = variance_break_locate(&res, window, settings.zeta)?;
            locator_window = Some(window);
            zeta = Some(settings.zeta);
            change_point = Some(ChangePointSummary {
                method: "variance-window-contrast".into(),
                index: loc.index,
                fraction: loc.fraction,
                objective: loc.contrast,
            });
            // Neither segment can support windows wider than its own span.
            let c = clamp_piecewise_bandwidth(n, loc.fraction, settings.var_bandwidth);
            variance_fit_piecewise(&res, loc.fraction, c, &kernel)?
        }
    };
    let w = w_sequence(&res, &var_fit, k);
    let statistic = cusum_correlation_statistic(&w);
    let sample = classical_bootstrap_sample(
        &w.values,
        m,
        settings.bootstrap.replicates,
        settings.bootstrap.seed,
    );
    let sorted = order_statistics(sample);
    let (decisions, p_value) = classical_decisions(statistic, &sorted, &settings.bootstrap.alphas);
    Ok(TestReport {
        test: "classical-correlation".into(),
        n,
        statistic,
        decisions,
        p_value,
        change_point,
        tuning: Tuning {
            mean_bandwidth: settings.mean_bandwidth,
            mean_bandwidth_source: "fixed".into(),
            var_bandwidth: Some(var_fit.var_bandwidth),
            var_bandwidth_source: Some("fixed".into()),
            window: m,
            locator_window,
            zeta,
            kernel: settings.kernel.name().into(),
            replicates: settings.bootstrap.replicates,
            seed: settings.bootstrap.seed,
            lag: Some(k),
            variance_variant: Some(var_fit.variant.name().into()),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::Residuals;

    fn res_from_squares(squares: &[f64]) -> Residuals {
        Residuals::from_parts(squares.iter().map(|v| v.sqrt()).collect(), 1e-8)
    }

    #[test]
    fn drift_is_pinned_to_zero_at_the_last_index() {
        let s = CusumSeries::new(vec![0.3, -1.2, 4.5, 0.0, 2.2]);
        assert_eq!(s.drift(5), 0.0);
    }

    #[test]
    fn constant_summands_give_zero_statistic() {
        let res = res_from_squares(&[2.0; 16]);
        assert!(cusum_variance_statistic(&res) < 1e-12);
    }

    #[test]
    fn statistic_scales_with_the_square_of_the_data() {
        let e: Vec<f64> = (1..=20).map(|i| (i as f64).sin() + 0.2).collect();
        let base = cusum_variance_statistic(&Residuals::from_parts(e.clone(), 1e-8));
        let scaled = cusum_variance_statistic(&Residuals::from_parts(
            e.iter().map(|v| 3.0 * v).collect(),
            1e-8,
        ));
        assert!((scaled - 9.0 * base).abs() < 1e-9 * base.max(1.0));
    }

    #[test]
    fn w_sequence_zeroes_products_past_the_sample_end() {
        let n = 12;
        let res = Residuals::from_parts((1..=n).map(|i| i as f64).collect(), 1e-8);
        let var_fit = crate::smoothing::variance_fit_smooth(
            &Residuals::from_parts(vec![1.0; n], 1e-8),
            0.3,
            &KernelSpec::new(KernelId::Epanechnikov),
        )
        .unwrap();
        let w = w_sequence(&res, &var_fit, 2);
        assert_eq!(w.values[n - 1], 0.0);
        assert_eq!(w.values[n - 2], 0.0);
        assert!(w.values[n - 3] != 0.0);
    }

    #[test]
    fn w_sequence_is_scale_invariant_elementwise() {
        let n = 40;
        let kernel = KernelSpec::new(KernelId::Epanechnikov);
        let base: Vec<f64> = (1..=n)
            .map(|i| ((i * 23 % 11) as f64 - 5.0) / 4.0)
            .collect();
        let w_of = |scale: f64| {
            let values: Vec<f64> = base.iter().map(|v| scale * v).collect();
            let floor = crate::smoothing::default_variance_floor(&values);
            let res = Residuals::from_parts(values, floor);
            let vf = variance_fit_smooth(&res, 0.25, &kernel).unwrap();
            w_sequence(&res, &vf, 1)
        };
        let w1 = w_of(1.0);
        for scale in [0.1, 10.0] {
            let ws = w_of(scale);
            for (a, b) in w1.values.iter().zip(ws.values.iter()) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b} at scale {scale}");
            }
        }
    }

    #[test]
    fn phi_vanishes_for_zero_multipliers_and_full_window() {
        let values = vec![1.0, 0.5, 2.0, 1.5, 0.25, 1.0];
        let phi = bootstrap_phi(&values, 2, &[0.0; 5]).unwrap();
        assert!(phi.iter().all(|&v| v == 0.0));
        // m = n: the single centered block sum is exactly zero.
        let phi = bootstrap_phi(&values, 6, &[3.7]).unwrap();
        assert_eq!(phi, vec![0.0]);
    }

    #[test]
    fn phi_rejects_dimension_mismatches() {
        assert!(matches!(
            bootstrap_phi(&[1.0, 2.0, 3.0], 2, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn max_statistic_removes_linear_drift() {
        // phi_i proportional to i / (n - m + 1) * phi_end is annihilated.
        let n = 20;
        let m = 4;
        let len = n - m + 1;
        let phi: Vec<f64> = (1..=len).map(|i| 2.5 * i as f64 / len as f64).collect();
        let stat = bootstrap_max_statistic(&phi, m, n).unwrap();
        assert!(stat < 1e-14);
        assert!(bootstrap_max_statistic(&phi, 10, n).is_err()); // wrong length
    }

    #[test]
    fn bootstrap_config_validation() {
        let mut cfg = BootstrapConfig::default();
        assert_eq!(cfg.validate(500).unwrap(), 7);
        cfg.window = Some(300);
        assert!(cfg.validate(500).is_err());
        cfg.window = Some(10);
        cfg.replicates = 100;
        assert!(cfg.validate(500).is_err());
    }

    #[test]
    fn decisions_are_monotone_across_levels() {
        let sorted: Vec<f64> = (1..=200).map(|i| i as f64 / 100.0).collect();
        for stat in [0.3, 1.2, 1.91, 2.5] {
            let (dec, p) = classical_decisions(stat, &sorted, &[0.05, 0.10]);
            assert!(!dec[0].reject | dec[1].reject, "reject at 5% implies 10%");
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn replicate_streams_are_reproducible() {
        let a = standard_normal_draws(replicate_seed(9, 4), 16);
        let b = standard_normal_draws(replicate_seed(9, 4), 16);
        assert_eq!(a, b);
        let c = standard_normal_draws(replicate_seed(9, 5), 16);
        assert_ne!(a, c);
    }
}
