//! Tests of relevant-change hypotheses: the null states that the jump in the
//! variance (or lag-k correlation) is at most a practical margin delta.
//!
//! The statistic is a normalized L2 norm of the CUSUM process, which
//! estimates the squared jump consistently. Critical values come from a
//! multiplier bootstrap on the jump-centered summands; the replicate
//! statistic is a weighted sum of drift-corrected bootstrap partial sums
//! rather than a maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusum::{
    centered_window_sums, default_cube_root_window, order_statistics, phi_from_centered,
    replicate_seed, standard_normal_draws, BootstrapConfig, CusumSeries,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelId, KernelSpec};
use crate::numeric::{floor_index, normal_cdf, normal_quantile};
use crate::report::{
    ChangePointSummary, DeltaEstimate, RelevantAlphaDecision, RelevantTestReport, Tuning,
};
use crate::series::TimeSeries;
use crate::smoothing::{
    clamp_piecewise_bandwidth, local_linear_fit, residuals, variance_break_locate,
    variance_fit_piecewise, variance_fit_smooth, Residuals, VarianceFit, VarianceVariant,
};

/// What a change-point estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeTarget {
    Variance,
    Correlation { lag: usize },
}

/// Argmax-type change-point estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChangePointEstimate {
    /// One-based maximizing index.
    pub index: usize,
    /// index / n.
    pub fraction: f64,
    /// Squared drift at the maximizer.
    pub objective: f64,
    pub target: ChangeTarget,
}

impl ChangePointEstimate {
    fn summary(&self, method: &str) -> ChangePointSummary {
        ChangePointSummary {
            method: method.into(),
            index: self.index,
            fraction: self.fraction,
            objective: self.objective,
        }
    }
}

fn guard_endpoints(cp: &ChangePointEstimate, n: usize) -> Result<()> {
    if cp.index <= 1 || cp.index >= n {
        return Err(Error::EndpointChangePoint { index: cp.index, n });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Variance
// ---------------------------------------------------------------------------

/// Change-point estimate maximizing the squared drift of the squared-residual
/// partial sums; smallest index on ties.
pub fn variance_cp_argmax(res: &Residuals) -> ChangePointEstimate {
    let n = res.len();
    assert!(n >= 4, "need at least 4 observations");
    let series = CusumSeries::new(res.squared());
    let mut best = f64::NEG_INFINITY;
    let mut arg = 1;
    for i in 1..=n {
        let d = series.drift(i);
        let obj = d * d;
        if obj > best {
            best = obj;
            arg = i;
        }
    }
    ChangePointEstimate {
        index: arg,
        fraction: arg as f64 / n as f64,
        objective: best,
        target: ChangeTarget::Variance,
    }
}

/// Mean squared residual before and after the estimated change point.
pub fn variance_delta(res: &Residuals, cp: &ChangePointEstimate) -> Result<DeltaEstimate> {
    let n = res.len();
    let split = cp.index;
    if split < 1 || split >= n {
        return Err(Error::EndpointChangePoint { index: split, n });
    }
    let sq = res.squared();
    let before = sq[..split].iter().sum::<f64>() / split as f64;
    let after = sq[split..].iter().sum::<f64>() / (n - split) as f64;
    Ok(DeltaEstimate {
        before,
        after,
        delta: after - before,
    })
}

/// Exact integral of the squared CUSUM process: the process is affine in s
/// on each grid cell [i/n, (i+1)/n), so every cell integrates in closed
/// form. `prefix` holds the partial sums (prefix[0] = 0) and `total` the
/// drift total.
fn drift_l2_integral(prefix: &[f64], total: f64, n: usize) -> f64 {
    let nf = n as f64;
    let slope = total / nf;
    let mut acc = 0.0;
    for (i, p) in prefix.iter().take(n).enumerate() {
        let level = p / nf;
        let s0 = i as f64 / nf;
        let s1 = (i + 1) as f64 / nf;
        acc += level * level * (s1 - s0) - level * slope * (s1 * s1 - s0 * s0)
            + slope * slope * (s1 * s1 * s1 - s0 * s0 * s0) / 3.0;
    }
    acc
}

/// Normalized L2 statistic for a relevant variance change:
/// 3 / (t^2 (1-t)^2) times the integral of the squared CUSUM process of the
/// squared residuals.
pub fn relevant_variance_statistic(res: &Residuals, cp: &ChangePointEstimate) -> Result<f64> {
    let n = res.len();
    guard_endpoints(cp, n)?;
    let series = CusumSeries::new(res.squared());
    let prefix: Vec<f64> = (0..=n).map(|i| series.partial(i)).collect();
    let integral = drift_l2_integral(&prefix, series.total(), n);
    let t = cp.fraction;
    Ok(3.0 / (t * t * (1.0 - t) * (1.0 - t)) * integral)
}

/// Replicate statistic: weighted sum of drift-corrected bootstrap partial
/// sums against the triangular kernel (i/n) t - min(i/n, t).
fn relevant_m_from_phi(phi: &[f64], m: usize, n: usize, t: f64) -> f64 {
    let len = n - m + 1;
    debug_assert_eq!(phi.len(), len);
    let last = phi[len - 1];
    let mut acc = 0.0;
    for i in (m + 1)..=len {
        let centered = phi[i - 1] - (i as f64 / len as f64) * last;
        let frac = i as f64 / n as f64;
        acc += centered * (frac * t - frac.min(t));
    }
    acc * 6.0 / (n as f64 * t * t * (1.0 - t) * (1.0 - t))
}

/// One deterministic replicate of the relevant-test bootstrap: the weighted
/// statistic computed from given summands and multipliers. The sampled
/// bootstrap runs exactly this computation with seed-derived multipliers.
pub fn relevant_bootstrap_replicate(
    summands: &[f64],
    m: usize,
    t_fraction: f64,
    multipliers: &[f64],
) -> crate::error::Result<f64> {
    let n = summands.len();
    let phi = crate::cusum::bootstrap_phi(summands, m, multipliers)?;
    if m + 1 > n - m + 1 {
        return Err(Error::BadBootstrapConfig(format!(
            "empty summation range: m = {m}, n = {n}"
        )));
    }
    Ok(relevant_m_from_phi(&phi, m, n, t_fraction))
}

fn relevant_bootstrap_sample(
    summands: &[f64],
    m: usize,
    t: f64,
    replicates: usize,
    seed: u64,
) -> Vec<f64> {
    let n = summands.len();
    let centered = centered_window_sums(summands, m);
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let draws = standard_normal_draws(replicate_seed(seed, r as u64), n - m + 1);
            let phi = phi_from_centered(&centered, m, &draws);
            relevant_m_from_phi(&phi, m, n, t)
        })
        .collect()
}

/// Jump-centered summands for the variance bootstrap:
/// e_j^2 - delta * 1(j >= split).
fn variance_bootstrap_summands(res: &Residuals, split: usize, delta: f64) -> Vec<f64> {
    res.squared()
        .iter()
        .enumerate()
        .map(|(j0, v)| if j0 + 1 >= split { v - delta } else { *v })
        .collect()
}

/// Bootstrap sample of the limiting-law surrogate for the relevant variance
/// test.
pub fn relevant_variance_bootstrap(
    res: &Residuals,
    cp: &ChangePointEstimate,
    delta_est: &DeltaEstimate,
    cfg: &BootstrapConfig,
) -> Result<Vec<f64>> {
    let n = res.len();
    guard_endpoints(cp, n)?;
    let m = cfg.validate(n)?;
    let summands = variance_bootstrap_summands(res, cp.index, delta_est.delta);
    Ok(relevant_bootstrap_sample(
        &summands,
        m,
        cp.fraction,
        cfg.replicates,
        cfg.seed,
    ))
}

/// Decisions and p-value of a relevant test: reject when
/// statistic > delta^2 + quantile * delta / sqrt(n).
fn relevant_decisions(
    statistic: f64,
    sorted: &[f64],
    alphas: &[f64],
    delta: f64,
    n: usize,
) -> (Vec<RelevantAlphaDecision>, f64) {
    let b = sorted.len();
    let root_n = (n as f64).sqrt();
    let decisions = alphas
        .iter()
        .map(|&alpha| {
            let idx = floor_index(b as f64 * (1.0 - alpha)).clamp(1, b);
            let bootstrap_quantile = sorted[idx - 1];
            let threshold = delta * delta + bootstrap_quantile * delta / root_n;
            RelevantAlphaDecision {
                alpha,
                bootstrap_quantile,
                threshold,
                reject: statistic > threshold,
            }
        })
        .collect();
    // Count replicates whose threshold stays at or below the statistic.
    let below = sorted.partition_point(|&q| delta * delta + q * delta / root_n <= statistic);
    let p_value = 1.0 - below as f64 / b as f64;
    (decisions, p_value)
}

/// Settings shared by both relevant tests.
#[derive(Debug, Clone)]
pub struct RelevantTestSettings {
    pub mean_bandwidth: f64,
    /// Variance smoother bandwidth (correlation test only).
    pub var_bandwidth: Option<f64>,
    /// Variance estimate for the correlation test.
    pub variant: VarianceVariant,
    pub locator_window: Option<usize>,
    pub zeta: f64,
    pub kernel: KernelId,
    pub bootstrap: BootstrapConfig,
}

impl RelevantTestSettings {
    pub fn variance(mean_bandwidth: f64) -> Self {
        RelevantTestSettings {
            mean_bandwidth,
            var_bandwidth: None,
            variant: VarianceVariant::Piecewise,
            locator_window: None,
            zeta: crate::cusum::DEFAULT_ZETA,
            kernel: KernelId::Epanechnikov,
            bootstrap: BootstrapConfig::default(),
        }
    }

    pub fn correlation(mean_bandwidth: f64, var_bandwidth: f64) -> Self {
        RelevantTestSettings {
            var_bandwidth: Some(var_bandwidth),
            ..Self::variance(mean_bandwidth)
        }
    }
}

/// Full relevant-variance test: H0 says the variance jump is at most
/// `delta_threshold` in absolute value.
pub fn relevant_variance_test(
    series: &TimeSeries,
    delta_threshold: f64,
    settings: &RelevantTestSettings,
) -> Result<RelevantTestReport> {
    if !(delta_threshold > 0.0) {
        return Err(Error::InvalidParameter(
            "relevance margin delta must be positive".into(),
        ));
    }
    let n = series.len();
    let m = settings.bootstrap.validate(n)?;
    let kernel = KernelSpec::new(settings.kernel);
    let fit = local_linear_fit(series, settings.mean_bandwidth, &kernel)?;
    let res = residuals(series, &fit)?;
    let cp = variance_cp_argmax(&res);
    guard_endpoints(&cp, n)?;
    let delta_est = variance_delta(&res, &cp)?;
    let statistic = relevant_variance_statistic(&res, &cp)?;
    let sample = relevant_variance_bootstrap(&res, &cp, &delta_est, &settings.bootstrap)?;
    let sorted = order_statistics(sample);
    let (decisions, p_value) = relevant_decisions(
        statistic,
        &sorted,
        &settings.bootstrap.alphas,
        delta_threshold,
        n,
    );
    Ok(RelevantTestReport {
        test: "relevant-variance".into(),
        n,
        statistic,
        delta_threshold,
        delta_estimate: delta_est,
        change_point: cp.summary("variance-cusum-argmax"),
        variance_break: None,
        decisions,
        p_value,
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

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

/// Normalized lag-k products w_j = e_j e_{j+k} / sigma2*(t_j) with the
/// convention that residuals at indices >= n read as zero, so products
/// reaching the last observation vanish.
pub fn correlation_w_values(res: &Residuals, var_fit: &VarianceFit, k: usize) -> Vec<f64> {
    let n = res.len();
    assert!(k >= 1 && k < n);
    assert_eq!(var_fit.sigma2.len(), n);
    (1..=n)
        .map(|j| {
            if j + k >= n {
                0.0
            } else {
                res.at(j) * res.at(j + k) / var_fit.sigma2[j - 1]
            }
        })
        .collect()
}

/// CUSUM process of the normalized lag products at the grid points,
/// m = 1..n: U(m/n) = P_m / n - (m/n) * Q / n, with Q the full-sample sum.
fn correlation_drift(prefix: &[f64], n: usize, m: usize) -> f64 {
    let nf = n as f64;
    prefix[m] / nf - (m as f64 / nf) * prefix[n] / nf
}

/// Change-point estimate for the correlation structure: argmax of the
/// squared CUSUM process of the normalized lag products.
pub fn correlation_cp_argmax(
    res: &Residuals,
    var_fit: &VarianceFit,
    k: usize,
) -> ChangePointEstimate {
    let n = res.len();
    let w = correlation_w_values(res, var_fit, k);
    let mut prefix = vec![0.0; n + 1];
    for (j, v) in w.iter().enumerate() {
        prefix[j + 1] = prefix[j] + v;
    }
    let mut best = f64::NEG_INFINITY;
    let mut arg = 1;
    for m in 1..=n {
        let d = correlation_drift(&prefix, n, m);
        let obj = d * d;
        if obj > best {
            best = obj;
            arg = m;
        }
    }
    ChangePointEstimate {
        index: arg,
        fraction: arg as f64 / n as f64,
        objective: best,
        target: ChangeTarget::Correlation { lag: k },
    }
}

/// Segment means of the normalized lag products. The sum after the change
/// point stops `k` short of the sample end while the normalizer keeps the
/// full segment length, matching the zero-product convention.
pub fn correlation_delta(
    res: &Residuals,
    var_fit: &VarianceFit,
    cp: &ChangePointEstimate,
    k: usize,
) -> Result<DeltaEstimate> {
    let n = res.len();
    let split = cp.index;
    if split < 1 || split >= n {
        return Err(Error::EndpointChangePoint { index: split, n });
    }
    let w = correlation_w_values(res, var_fit, k);
    let before = w[..split].iter().sum::<f64>() / split as f64;
    // w_j = 0 for j > n - k, so summing to the end equals summing to n - k.
    let after = w[split..].iter().sum::<f64>() / (n - split) as f64;
    Ok(DeltaEstimate {
        before,
        after,
        delta: after - before,
    })
}

/// Normalized L2 statistic for a relevant correlation change.
pub fn relevant_correlation_statistic(
    res: &Residuals,
    var_fit: &VarianceFit,
    cp: &ChangePointEstimate,
    k: usize,
) -> Result<f64> {
    let n = res.len();
    guard_endpoints(cp, n)?;
    let w = correlation_w_values(res, var_fit, k);
    let mut prefix = vec![0.0; n + 1];
    for (j, v) in w.iter().enumerate() {
        prefix[j + 1] = prefix[j] + v;
    }
    let integral = drift_l2_integral(&prefix, prefix[n], n);
    let t = cp.fraction;
    Ok(3.0 / (t * t * (1.0 - t) * (1.0 - t)) * integral)
}

/// Bootstrap sample for the relevant correlation test; summands are the
/// jump-centered normalized lag products.
pub fn relevant_correlation_bootstrap(
    res: &Residuals,
    var_fit: &VarianceFit,
    cp: &ChangePointEstimate,
    delta_est: &DeltaEstimate,
    k: usize,
    cfg: &BootstrapConfig,
) -> Result<Vec<f64>> {
    let n = res.len();
    guard_endpoints(cp, n)?;
    let m = cfg.validate(n)?;
    let w = correlation_w_values(res, var_fit, k);
    let summands: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(j0, v)| {
            if j0 + 1 >= cp.index {
                v - delta_est.delta
            } else {
                *v
            }
        })
        .collect();
    Ok(relevant_bootstrap_sample(
        &summands,
        m,
        cp.fraction,
        cfg.replicates,
        cfg.seed,
    ))
}

/// Full relevant-correlation test: H0 says the lag-k correlation jump is at
/// most `delta_threshold` in absolute value.
pub fn relevant_correlation_test(
    series: &TimeSeries,
    k: usize,
    delta_threshold: f64,
    settings: &RelevantTestSettings,
) -> Result<RelevantTestReport> {
    if !(delta_threshold > 0.0) {
        return Err(Error::InvalidParameter(
            "relevance margin delta must be positive".into(),
        ));
    }
    let n = series.len();
    if k < 1 || 4 * k >= n {
        return Err(Error::InvalidParameter(format!(
            "lag {k} out of range for n = {n}"
        )));
    }
    let m = settings.bootstrap.validate(n)?;
    let c = settings.var_bandwidth.ok_or_else(|| {
        Error::InvalidParameter("correlation test needs a variance bandwidth".into())
    })?;
    let kernel = KernelSpec::new(settings.kernel);
    let fit = local_linear_fit(series, settings.mean_bandwidth, &kernel)?;
    let res = residuals(series, &fit)?;
    let mut variance_break = None;
    let mut locator_window = None;
    let mut zeta = None;
    let var_fit = match settings.variant {
        VarianceVariant::Smooth => variance_fit_smooth(&res, c, &kernel)?,
        VarianceVariant::Piecewise => {
            let window = settings
                .locator_window
                .unwrap_or_else(|| default_cube_root_window(n));
            let loc = variance_break_locate(&res, window, settings.zeta)?;
            locator_window = Some(window);
            zeta = Some(settings.zeta);
            variance_break = Some(ChangePointSummary {
                method: "variance-window-contrast".into(),
                index: loc.index,
                fraction: loc.fraction,
                objective: loc.contrast,
            });
            // Neither segment can support windows wider than its own span.
            let c = clamp_piecewise_bandwidth(n, loc.fraction, c);
            variance_fit_piecewise(&res, loc.fraction, c, &kernel)?
        }
    };
    let cp = correlation_cp_argmax(&res, &var_fit, k);
    guard_endpoints(&cp, n)?;
    let delta_est = correlation_delta(&res, &var_fit, &cp, k)?;
    let statistic = relevant_correlation_statistic(&res, &var_fit, &cp, k)?;
    let sample =
        relevant_correlation_bootstrap(&res, &var_fit, &cp, &delta_est, k, &settings.bootstrap)?;
    let sorted = order_statistics(sample);
    let (decisions, p_value) = relevant_decisions(
        statistic,
        &sorted,
        &settings.bootstrap.alphas,
        delta_threshold,
        n,
    );
    Ok(RelevantTestReport {
        test: "relevant-correlation".into(),
        n,
        statistic,
        delta_threshold,
        delta_estimate: delta_est,
        change_point: cp.summary("correlation-cusum-argmax"),
        variance_break,
        decisions,
        p_value,
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

// ---------------------------------------------------------------------------
// Power approximation
// ---------------------------------------------------------------------------

/// Large-sample power approximation of the relevant tests:
/// 1 - Psi(sqrt(n) (delta^2 - Delta^2)/|Delta| + v_{1-alpha} delta/|Delta|),
/// where Psi is the centered normal law of the limiting variable with
/// standard deviation `sd_limit` and v_{1-alpha} its upper quantile. The
/// bootstrap sample standard deviation is a natural plug-in for `sd_limit`.
pub fn power_approximation(
    delta: f64,
    true_jump_abs: f64,
    n: usize,
    sd_limit: f64,
    alpha: f64,
) -> Result<f64> {
    if !(true_jump_abs > 0.0) {
        return Err(Error::InvalidParameter(
            "power approximation needs a nonzero true jump".into(),
        ));
    }
    if !(sd_limit > 0.0) {
        return Err(Error::InvalidParameter(
            "limit standard deviation must be positive".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} outside (0, 1)"
        )));
    }
    if delta < 0.0 {
        return Err(Error::InvalidParameter("delta must be nonnegative".into()));
    }
    let v = sd_limit * normal_quantile(1.0 - alpha);
    let arg = (n as f64).sqrt() * (delta * delta - true_jump_abs * true_jump_abs) / true_jump_abs
        + v * delta / true_jump_abs;
    Ok(1.0 - normal_cdf(arg / sd_limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::Residuals;

    fn res_from_squares(squares: &[f64]) -> Residuals {
        Residuals::from_parts(squares.iter().map(|v| v.sqrt()).collect(), 1e-8)
    }

    fn step_squares(n: usize, split: usize, low: f64, high: f64) -> Residuals {
        res_from_squares(
            &(1..=n)
                .map(|i| if i <= split { low } else { high })
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn argmax_lands_on_a_noiseless_step() {
        let res = step_squares(64, 32, 1.0, 2.0);
        let cp = variance_cp_argmax(&res);
        assert_eq!(cp.index, 32);
        assert_eq!(cp.fraction, 0.5);
    }

    #[test]
    fn argmax_constant_input_returns_the_first_index() {
        let res = res_from_squares(&[3.0; 16]);
        let cp = variance_cp_argmax(&res);
        assert_eq!(cp.index, 1);
        assert_eq!(cp.objective, 0.0);
    }

    #[test]
    fn argmax_index_is_invariant_under_positive_scaling() {
        let e: Vec<f64> = (1..=40).map(|i| (i as f64 * 0.7).sin() + 1.5).collect();
        let cp1 = variance_cp_argmax(&Residuals::from_parts(e.clone(), 1e-8));
        let cp2 = variance_cp_argmax(&Residuals::from_parts(
            e.iter().map(|v| 5.0 * v).collect(),
            1e-8,
        ));
        assert_eq!(cp1.index, cp2.index);
    }

    #[test]
    fn delta_of_a_step_is_the_level_difference() {
        let res = step_squares(20, 10, 1.0, 2.0);
        let cp = variance_cp_argmax(&res);
        let d = variance_delta(&res, &cp).unwrap();
        assert!((d.delta - 1.0).abs() < 1e-12);
        assert!((d.before - 1.0).abs() < 1e-12);
        assert!((d.after - 2.0).abs() < 1e-12);
    }

    #[test]
    fn delta_is_zero_on_constant_squares() {
        let res = res_from_squares(&[2.5; 12]);
        let cp = ChangePointEstimate {
            index: 5,
            fraction: 5.0 / 12.0,
            objective: 0.0,
            target: ChangeTarget::Variance,
        };
        let d = variance_delta(&res, &cp).unwrap();
        assert!(d.delta.abs() < 1e-12);
    }

    #[test]
    fn statistic_of_constant_squares_is_numerically_zero() {
        let n = 50;
        let res = res_from_squares(&vec![2.0; n]);
        let cp = ChangePointEstimate {
            index: n / 2,
            fraction: 0.5,
            objective: 0.0,
            target: ChangeTarget::Variance,
        };
        let stat = relevant_variance_statistic(&res, &cp).unwrap();
        // Only the within-cell linear remainder survives; it is O(n^-2).
        let total: f64 = res.squared().iter().sum();
        let bound = (total / (n * n) as f64).powi(2) / 3.0 * 16.0 * n as f64;
        assert!(stat.abs() < bound.max(1e-12), "stat = {stat}");
    }

    #[test]
    fn endpoint_change_points_are_rejected() {
        let res = res_from_squares(&[1.0; 16]);
        let cp = variance_cp_argmax(&res); // index 1
        assert!(matches!(
            relevant_variance_statistic(&res, &cp),
            Err(Error::EndpointChangePoint { .. })
        ));
    }

    #[test]
    fn triangular_weight_sequence_matches_enumeration() {
        // At t = 1/2 and i/n <= 1/2 the weight is -i/(2n).
        let n = 24;
        let t = 0.5;
        for i in 1..=n {
            let frac = i as f64 / n as f64;
            let weight = frac * t - frac.min(t);
            if frac <= t {
                assert!((weight + frac / 2.0).abs() < 1e-15);
            } else {
                assert!((weight - (frac * 0.5 - 0.5)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_multipliers_give_zero_replicates() {
        let res = step_squares(40, 20, 1.0, 2.0);
        let cp = variance_cp_argmax(&res);
        let d = variance_delta(&res, &cp).unwrap();
        let summands = variance_bootstrap_summands(&res, cp.index, d.delta);
        let centered = centered_window_sums(&summands, 4);
        let phi = phi_from_centered(&centered, 4, &vec![0.0; 37]);
        assert_eq!(relevant_m_from_phi(&phi, 4, 40, cp.fraction), 0.0);
    }

    #[test]
    fn power_approximation_boundary_cases() {
        // At delta = |Delta| the power equals alpha for every n.
        for &alpha in &[0.05, 0.10] {
            let p = power_approximation(0.2, 0.2, 500, 1.3, alpha).unwrap();
            assert!((p - alpha).abs() < 1e-10, "alpha {alpha}: {p}");
        }
        // At delta = 0 the power tends to one with n.
        let p = power_approximation(0.0, 0.2, 4000, 1.3, 0.05).unwrap();
        assert!(p > 0.999999);
        assert!(power_approximation(0.1, 0.0, 100, 1.0, 0.05).is_err());
    }

    #[test]
    fn correlation_products_honor_the_zero_convention() {
        let n = 16;
        let res = Residuals::from_parts(vec![1.0; n], 1e-8);
        let var_fit = crate::smoothing::variance_fit_smooth(
            &Residuals::from_parts(vec![1.0; n], 1e-8),
            0.3,
            &KernelSpec::new(KernelId::Epanechnikov),
        )
        .unwrap();
        let w = correlation_w_values(&res, &var_fit, 3);
        // Products whose lead index reaches the final observation vanish.
        assert_eq!(w[n - 4], 0.0); // j = n-3, j+k = n
        assert!(w[n - 5] > 0.0); // j = n-4, j+k = n-1
    }
}
