//! Monte Carlo properties: empirical moments against the analytic oracles,
//! null-model sanity of the tests, and selector behaviour on white noise.

use rayon::prelude::*;

use secondchange::bandwidth::gcv_select;
use secondchange::cusum::{
    classical_variance_test, normal_multipliers, replicate_seed, BootstrapConfig,
    VarianceTestSettings,
};
use secondchange::kernel::{KernelId, KernelSpec};
use secondchange::relevant::{relevant_variance_test, RelevantTestSettings};
use secondchange::sim::{oracle, simulate, ModelId, PlsModelSpec};
use secondchange::TimeSeries;

/// Sample variance and lag-1 correlation at an interior grid point match the
/// oracle within three Monte Carlo standard errors over 10^4 replicates.
#[test]
fn empirical_moments_match_the_oracle() {
    let n = 64;
    let reps = 10_000u64;
    for model in [ModelId::II, ModelId::VI] {
        let spec = PlsModelSpec::new(model, None).unwrap().with_mean(false);
        let orc = oracle(&spec).unwrap();
        for idx in [16usize, 48] {
            let t = idx as f64 / n as f64;
            let draws: Vec<(f64, f64)> = (0..reps)
                .into_par_iter()
                .map(|seed| {
                    let y = simulate(&spec, n, seed).unwrap();
                    (y.values()[idx - 1], y.values()[idx])
                })
                .collect();
            let r = reps as f64;
            let var = draws.iter().map(|(a, _)| a * a).sum::<f64>() / r;
            let sd_sq = {
                let mean2 = var;
                (draws
                    .iter()
                    .map(|(a, _)| (a * a - mean2) * (a * a - mean2))
                    .sum::<f64>()
                    / (r - 1.0))
                    .sqrt()
            };
            let want_var = orc.variance(t);
            assert!(
                (var - want_var).abs() <= 3.0 * sd_sq / r.sqrt(),
                "{model:?} t={t}: var {var} vs {want_var}"
            );
            let lead_var = draws.iter().map(|(_, b)| b * b).sum::<f64>() / r;
            let cross = draws.iter().map(|(a, b)| a * b).sum::<f64>() / r;
            let corr = cross / (var.sqrt() * lead_var.sqrt());
            let want_corr = orc.lag_correlation(t, 1);
            let se_corr = (1.0 - want_corr * want_corr) / r.sqrt();
            assert!(
                (corr - want_corr).abs() <= 3.0 * se_corr,
                "{model:?} t={t}: corr {corr} vs {want_corr}"
            );
        }
    }
}

/// Within each half of a variance-break path the local sample variance moves
/// continuously: the largest adjacent-window jump stays below the jump
/// across the break.
#[test]
fn break_placement_smoke_check() {
    let n = 20_000;
    let window = 1000;
    let spec = PlsModelSpec::new(ModelId::III, None)
        .unwrap()
        .with_mean(false);
    for seed in 0..5u64 {
        let y = simulate(&spec, n, seed).unwrap();
        let win_var = |lo: usize| -> f64 {
            y.values()[lo..lo + window]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                / window as f64
        };
        let halves = n / 2 / window; // windows per half
        let mut max_adjacent = 0.0f64;
        for half_start in [0, n / 2] {
            for w in 0..halves - 1 {
                let a = win_var(half_start + w * window);
                let b = win_var(half_start + (w + 1) * window);
                max_adjacent = max_adjacent.max((a - b).abs());
            }
        }
        let across = (win_var(n / 2 - window) - win_var(n / 2)).abs();
        assert!(
            max_adjacent < across,
            "seed {seed}: adjacent jump {max_adjacent} vs break jump {across}"
        );
    }
}

/// On i.i.d. noise the classical variance test produces p-values that are
/// roughly uniform: across 200 runs, between 4% and 16% fall below 0.10.
#[test]
fn p_values_are_calibrated_on_iid_noise() {
    let n = 200;
    let runs = 200;
    let hits: usize = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let values = normal_multipliers(replicate_seed(4242, run), n);
            let y = TimeSeries::new(values).unwrap();
            let settings = VarianceTestSettings {
                mean_bandwidth: 0.15,
                kernel: KernelId::Epanechnikov,
                bootstrap: BootstrapConfig {
                    window: None,
                    replicates: 250,
                    seed: replicate_seed(999, run),
                    alphas: vec![0.10],
                },
            };
            let rep = classical_variance_test(&y, &settings).unwrap();
            usize::from(rep.p_value <= 0.10)
        })
        .sum();
    let share = hits as f64 / runs as f64;
    assert!(
        (0.04..=0.16).contains(&share),
        "share of p <= 0.10 was {share}"
    );
}

/// With no variance change at all the relevant statistic is of order 1/n, so
/// at margin 1/64 the rejection rate sits well below the nominal level.
#[test]
fn relevant_test_rarely_rejects_inside_the_null() {
    let n = 500;
    let runs = 200;
    let rejections: usize = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let spec = PlsModelSpec::new(ModelId::I, None).unwrap();
            let y = simulate(&spec, n, replicate_seed(77, run)).unwrap();
            let mut settings = RelevantTestSettings::variance(0.1);
            settings.bootstrap = BootstrapConfig {
                window: None,
                replicates: 300,
                seed: replicate_seed(78, run),
                alphas: vec![0.05, 0.10],
            };
            // The variance of this model sits at 1/12, so 3/64 is a small
            // margin yet large enough for the O(1/n) null statistic to sit
            // clearly inside it at this sample size.
            match relevant_variance_test(&y, 3.0 / 64.0, &settings) {
                Ok(rep) => usize::from(rep.reject_at(0.10).unwrap()),
                Err(_) => 0,
            }
        })
        .sum();
    let rate = rejections as f64 / runs as f64;
    assert!(
        rate < 0.05,
        "interior-null rejection rate {rate} >= alpha/2"
    );
}

/// On white noise with no trend the cross-validated bandwidth lands in the
/// upper half of the candidate grid in at least 90% of runs.
#[test]
fn gcv_prefers_wide_bandwidths_on_white_noise() {
    let n = 200;
    let runs = 200;
    let kernel = KernelSpec::new(KernelId::Epanechnikov);
    let hits: usize = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let values = normal_multipliers(replicate_seed(31337, run), n);
            let y = TimeSeries::new(values).unwrap();
            let sel = gcv_select(&y, &kernel).unwrap();
            let half = sel.grid[sel.grid.len() / 2];
            usize::from(sel.bandwidth >= half)
        })
        .sum();
    assert!(
        hits * 10 >= runs * 9,
        "upper-half selections: {hits}/{runs}"
    );
}
