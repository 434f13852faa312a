//! Simulation of piecewise locally stationary error processes.
//!
//! Each model is a nonlinear filter of an i.i.d. standard normal innovation
//! sequence: either a first-order autoregression whose coefficient switches
//! at the break point t = 0.5, or a (truncated) one-sided moving average
//! with smoothly time-varying geometric coefficients. A smooth output scale
//! multiplies the filter so that variance and lag correlation can change
//! independently of each other. Closed-form second-order moments are
//! available through [`oracle`] for testing.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Burn-in steps for autoregressive filters; the coefficient magnitudes are
/// at most 0.8, so the initialization error is below 0.8^200.
const AR_BURN_IN: usize = 200;

/// Default number of retained terms for moving-average filters.
pub const DEFAULT_MA_TRUNCATION: usize = 100;

const STREAM_MAIN: u64 = 0x6d61696e; // innovations with index >= 1
const STREAM_HISTORY: u64 = 0x68697374; // innovations with index <= 0

/// splitmix64 finalizer; used to derive independent substream seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An addressable i.i.d. standard normal sequence indexed over the whole
/// integer line. Indices >= 1 and indices <= 0 are drawn from two
/// independent substreams of the master seed, so the value at any index
/// depends only on (seed, index) and is reproducible bit-for-bit no matter
/// how much pre-sample history a caller requests.
#[derive(Debug, Clone, Copy)]
pub struct InnovationStream {
    seed: u64,
}

impl InnovationStream {
    pub fn new(seed: u64) -> Self {
        InnovationStream { seed }
    }

    /// Innovations for indices lo..=hi (lo may be non-positive), in index
    /// order.
    pub fn range(&self, lo: i64, hi: i64) -> Vec<f64> {
        assert!(lo <= hi);
        let mut out = vec![0.0; (hi - lo + 1) as usize];
        if lo <= 0 {
            // History stream yields indices 0, -1, -2, ... in that order.
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(self.seed, STREAM_HISTORY));
            let need = (-lo) as usize + 1;
            for offset in 0..need {
                let idx = -(offset as i64);
                let v: f64 = StandardNormal.sample(&mut rng);
                if idx >= lo && idx <= hi {
                    out[(idx - lo) as usize] = v;
                }
            }
        }
        if hi >= 1 {
            let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(self.seed, STREAM_MAIN));
            for idx in 1..=hi {
                let v: f64 = StandardNormal.sample(&mut rng);
                if idx >= lo {
                    out[(idx - lo) as usize] = v;
                }
            }
        }
        out
    }
}

/// Model identifiers. The primed variants carry a level parameter `lambda`
/// that interpolates between the null hypothesis (lambda = 0) and
/// increasingly strong alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    IPrime,
    IIPrime,
    IIIPrime,
    IVPrime,
}

impl ModelId {
    pub fn name(self) -> &'static str {
        match self {
            ModelId::I => "I",
            ModelId::II => "II",
            ModelId::III => "III",
            ModelId::IV => "IV",
            ModelId::V => "V",
            ModelId::VI => "VI",
            ModelId::IPrime => "I'",
            ModelId::IIPrime => "II'",
            ModelId::IIIPrime => "III'",
            ModelId::IVPrime => "IV'",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().replace("PRIME", "'").as_str() {
            "I" => Some(ModelId::I),
            "II" => Some(ModelId::II),
            "III" => Some(ModelId::III),
            "IV" => Some(ModelId::IV),
            "V" => Some(ModelId::V),
            "VI" => Some(ModelId::VI),
            "I'" => Some(ModelId::IPrime),
            "II'" => Some(ModelId::IIPrime),
            "III'" => Some(ModelId::IIIPrime),
            "IV'" => Some(ModelId::IVPrime),
            _ => None,
        }
    }

    pub fn is_primed(self) -> bool {
        matches!(
            self,
            ModelId::IPrime | ModelId::IIPrime | ModelId::IIIPrime | ModelId::IVPrime
        )
    }
}

impl std::str::FromStr for ModelId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ModelId::parse(s).ok_or_else(|| format!("unknown model '{s}'"))
    }
}

/// Full specification of a simulated process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlsModelSpec {
    pub model: ModelId,
    /// Level parameter; required for primed models, rejected otherwise.
    pub lambda: Option<f64>,
    /// Adds the quadratic trend mu(t) = 8(-(t-0.5)^2 + 0.25) when set.
    pub include_mean: bool,
    /// Retained terms for moving-average filters.
    pub ma_truncation: usize,
}

impl PlsModelSpec {
    pub fn new(model: ModelId, lambda: Option<f64>) -> Result<Self> {
        let spec = PlsModelSpec {
            model,
            lambda,
            include_mean: true,
            ma_truncation: DEFAULT_MA_TRUNCATION,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mean(mut self, include: bool) -> Self {
        self.include_mean = include;
        self
    }

    pub fn with_ma_truncation(mut self, m: usize) -> Self {
        self.ma_truncation = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ma_truncation < 1 {
            return Err(Error::InvalidParameter(
                "ma_truncation must be at least 1".into(),
            ));
        }
        match (self.model.is_primed(), self.lambda) {
            (true, None) => {
                return Err(Error::InvalidParameter(format!(
                    "model {} requires lambda",
                    self.model.name()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(format!(
                    "model {} takes no lambda",
                    self.model.name()
                )))
            }
            _ => {}
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                return Err(Error::InvalidParameter("lambda must be finite".into()));
            }
            let ok = match self.model {
                ModelId::IPrime => l > -1.0,
                ModelId::IIPrime => l > -2.0,
                // Keep the post-break autoregressive coefficient inside the
                // stationarity region.
                ModelId::IIIPrime => (0.3 - l).abs() < 1.0,
                ModelId::IVPrime => (0.5 - l).abs() < 1.0,
                _ => true,
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "lambda = {l} out of range for model {}",
                    self.model.name()
                )));
            }
        }
        Ok(())
    }

    fn filter(&self) -> Filter {
        match self.model {
            ModelId::I
            | ModelId::IPrime
            | ModelId::IV
            | ModelId::V
            | ModelId::VI
            | ModelId::IIIPrime
            | ModelId::IVPrime => Filter::Ar,
            ModelId::II | ModelId::III | ModelId::IIPrime => Filter::Ma,
        }
    }

    /// Autoregressive coefficient at design point `t` (AR models only).
    fn ar_coeff(&self, t: f64) -> f64 {
        let l = self.lambda.unwrap_or(0.0);
        match self.model {
            ModelId::I | ModelId::IPrime => {
                if t <= 0.5 {
                    0.5
                } else {
                    -0.5
                }
            }
            ModelId::IV | ModelId::V => 0.3,
            ModelId::VI => {
                if t <= 0.5 {
                    0.5
                } else {
                    0.7
                }
            }
            ModelId::IIIPrime => {
                if t <= 0.5 {
                    0.3
                } else {
                    0.3 - l
                }
            }
            ModelId::IVPrime => {
                if t <= 0.5 {
                    0.5 - l
                } else {
                    0.7
                }
            }
            _ => unreachable!("not an AR model"),
        }
    }

    /// Geometric moving-average coefficient at design point `t` (MA models).
    fn ma_coeff(&self, t: f64) -> f64 {
        match self.model {
            ModelId::II => 0.25 + 0.5 * t,
            ModelId::III | ModelId::IIPrime => {
                if t <= 0.5 {
                    0.25 + 0.5 * t
                } else {
                    0.5 - (t - 0.5) * (t - 0.5)
                }
            }
            _ => unreachable!("not an MA model"),
        }
    }

    /// Output scale multiplying the filter at design point `t`.
    fn scale(&self, t: f64) -> f64 {
        let l = self.lambda.unwrap_or(0.0);
        match self.model {
            ModelId::I => 0.25,
            ModelId::IPrime => {
                if t <= 0.5 {
                    0.25
                } else {
                    (1.0 + l).sqrt() * 0.25
                }
            }
            ModelId::II => (1.0 - self.ma_coeff(t).powi(2)).sqrt() / 4.0,
            ModelId::III => {
                let a = self.ma_coeff(t);
                if t <= 0.5 {
                    (1.0 - a * a).sqrt() / 8.0
                } else {
                    (2.0 * (1.0 - a * a)).sqrt() / 8.0
                }
            }
            ModelId::IIPrime => {
                let a = self.ma_coeff(t);
                if t <= 0.5 {
                    (1.0 - a * a).sqrt() / 8.0
                } else {
                    ((2.0 + l) * (1.0 - a * a)).sqrt() / 8.0
                }
            }
            ModelId::IV | ModelId::IIIPrime => (1.0 - (t - 0.5) * (t - 0.5)).sqrt() / 4.0,
            ModelId::V => {
                if t <= 0.5 {
                    (1.0 - (t - 0.5) * (t - 0.5)).sqrt() / 4.0
                } else {
                    (1.0 - 0.5 * t.sin()).sqrt() / 4.0
                }
            }
            ModelId::VI | ModelId::IVPrime => (1.0 - (t - 0.5) * (t - 0.5)).sqrt() / 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Filter {
    Ar,
    Ma,
}

/// The quadratic trend used by all simulated scenarios.
pub fn mean_function(t: f64) -> f64 {
    8.0 * (-(t - 0.5) * (t - 0.5) + 0.25)
}

/// Draws one path Y_1..Y_n of the model. Deterministic in (spec, n, seed).
pub fn simulate(spec: &PlsModelSpec, n: usize, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    if n < 8 {
        return Err(Error::SeriesTooShort { n, min: 8 });
    }
    let stream = InnovationStream::new(seed);
    let nf = n as f64;
    let errors: Vec<f64> = match spec.filter() {
        Filter::Ar => {
            let eps = stream.range(1 - AR_BURN_IN as i64, n as i64);
            let at = |idx: i64| eps[(idx - (1 - AR_BURN_IN as i64)) as usize];
            let phi_init = spec.ar_coeff(1.0 / nf);
            let mut state = 0.0;
            for j in (1 - AR_BURN_IN as i64)..=0 {
                state = phi_init * state + at(j);
            }
            (1..=n)
                .map(|i| {
                    let t = i as f64 / nf;
                    state = spec.ar_coeff(t) * state + at(i as i64);
                    spec.scale(t) * state
                })
                .collect()
        }
        Filter::Ma => {
            let m = spec.ma_truncation;
            let eps = stream.range(2 - m as i64, n as i64);
            let at = |idx: i64| eps[(idx - (2 - m as i64)) as usize];
            (1..=n)
                .map(|i| {
                    let t = i as f64 / nf;
                    let a = spec.ma_coeff(t);
                    let mut coeff = 1.0;
                    let mut acc = 0.0;
                    for j in 0..m {
                        acc += coeff * at(i as i64 - j as i64);
                        coeff *= a;
                    }
                    spec.scale(t) * acc
                })
                .collect()
        }
    };
    let values: Vec<f64> = if spec.include_mean {
        errors
            .iter()
            .enumerate()
            .map(|(j, e)| mean_function((j + 1) as f64 / nf) + e)
            .collect()
    } else {
        errors
    };
    TimeSeries::new(values)
}

/// Closed-form second-order structure of a model, valid away from the break
/// point. Moving-average moments use the same truncation as the simulator so
/// the two agree exactly.
#[derive(Debug, Clone, Copy)]
pub struct SecondOrderOracle {
    spec: PlsModelSpec,
}

impl SecondOrderOracle {
    pub fn variance(&self, t: f64) -> f64 {
        let s = self.spec.scale(t);
        match self.spec.filter() {
            Filter::Ar => {
                let phi = self.spec.ar_coeff(t);
                s * s / (1.0 - phi * phi)
            }
            Filter::Ma => {
                let a = self.spec.ma_coeff(t);
                s * s * geometric_cross_sum(a, 0, self.spec.ma_truncation)
            }
        }
    }

    pub fn lag_correlation(&self, t: f64, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self.spec.filter() {
            Filter::Ar => self.spec.ar_coeff(t).powi(k as i32),
            Filter::Ma => {
                let a = self.spec.ma_coeff(t);
                let m = self.spec.ma_truncation;
                if k >= m {
                    return 0.0;
                }
                geometric_cross_sum(a, k, m) / geometric_cross_sum(a, 0, m)
            }
        }
    }
}

/// sum_{j=0}^{m-1-k} a^j * a^{j+k}: the truncated cross moment of two
/// geometric coefficient sequences offset by `k`.
fn geometric_cross_sum(a: f64, k: usize, m: usize) -> f64 {
    let mut acc = 0.0;
    let mut term = a.powi(k as i32);
    for _ in 0..m.saturating_sub(k) {
        acc += term;
        term *= a * a;
    }
    acc
}

pub fn oracle(spec: &PlsModelSpec) -> Result<SecondOrderOracle> {
    spec.validate()?;
    Ok(SecondOrderOracle { spec: *spec })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(model: ModelId) -> PlsModelSpec {
        PlsModelSpec::new(model, None).unwrap()
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = spec(ModelId::III);
        let a = simulate(&s, 64, 7).unwrap();
        let b = simulate(&s, 64, 7).unwrap();
        assert_eq!(a.values(), b.values());
        let c = simulate(&s, 64, 8).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn innovations_are_index_addressable() {
        let stream = InnovationStream::new(42);
        let wide = stream.range(-10, 20);
        let narrow = stream.range(-2, 5);
        for idx in -2..=5i64 {
            assert_eq!(narrow[(idx + 2) as usize], wide[(idx + 10) as usize]);
        }
    }

    #[test]
    fn primed_model_at_lambda_zero_equals_base_model() {
        let base = simulate(&spec(ModelId::I), 128, 3).unwrap();
        let primed = PlsModelSpec::new(ModelId::IPrime, Some(0.0)).unwrap();
        let primed = simulate(&primed, 128, 3).unwrap();
        assert_eq!(base.values(), primed.values());
    }

    #[test]
    fn mean_function_peaks_at_two() {
        assert_eq!(mean_function(0.5), 2.0);
        assert!(mean_function(0.0).abs() < 1e-15);
        assert!(mean_function(1.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_ranges_are_enforced() {
        assert!(PlsModelSpec::new(ModelId::IPrime, Some(-1.0)).is_err());
        assert!(PlsModelSpec::new(ModelId::IPrime, Some(-0.9)).is_ok());
        assert!(PlsModelSpec::new(ModelId::IIPrime, Some(-2.0)).is_err());
        assert!(PlsModelSpec::new(ModelId::IIPrime, Some(-1.9)).is_ok());
        assert!(PlsModelSpec::new(ModelId::I, Some(0.1)).is_err());
        assert!(PlsModelSpec::new(ModelId::IIIPrime, None).is_err());
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            simulate(&spec(ModelId::I), 7, 0),
            Err(Error::SeriesTooShort { n: 7, min: 8 })
        ));
    }

    #[test]
    fn ma_truncation_changes_paths_below_tolerance() {
        // Coefficients are bounded by 0.75, so doubling the truncation from
        // 100 to 200 moves each value far less than 1e-6.
        for model in [ModelId::II, ModelId::III] {
            let s100 = spec(model).with_ma_truncation(100);
            let s200 = spec(model).with_ma_truncation(200);
            let a = simulate(&s100, 200, 11).unwrap();
            let b = simulate(&s200, 200, 11).unwrap();
            let max_diff = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(max_diff < 1e-6, "model {model:?}: {max_diff}");
        }
    }

    #[test]
    fn oracle_matches_hand_computed_values() {
        // AR(1) with coefficient 0.5 scaled by 1/4: variance 1/12.
        let o = oracle(&spec(ModelId::I)).unwrap();
        assert!((o.variance(0.25) - 1.0 / 12.0).abs() < 1e-15);
        assert!((o.variance(0.75) - 1.0 / 12.0).abs() < 1e-15);
        assert!((o.lag_correlation(0.25, 1) - 0.5).abs() < 1e-15);
        assert!((o.lag_correlation(0.75, 1) + 0.5).abs() < 1e-15);
        assert_eq!(o.lag_correlation(0.3, 0), 1.0);
        // Scale-normalized moving average keeps the variance at 1/16.
        let o2 = oracle(&spec(ModelId::II)).unwrap();
        for &t in &[0.1, 0.5, 0.9] {
            assert!((o2.variance(t) - 1.0 / 16.0).abs() < 1e-12, "t={t}");
        }
        // Its lag-1 correlation approaches the local coefficient.
        assert!((o2.lag_correlation(0.5, 1) - 0.5).abs() < 1e-10);
        // Variance of model III doubles across the break.
        let o3 = oracle(&spec(ModelId::III)).unwrap();
        assert!((o3.variance(0.4) - 1.0 / 64.0).abs() < 1e-12);
        assert!((o3.variance(0.6) - 2.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn model_id_parsing_accepts_primes() {
        assert_eq!(ModelId::parse("ii'"), Some(ModelId::IIPrime));
        assert_eq!(ModelId::parse("IVprime"), Some(ModelId::IVPrime));
        assert_eq!(ModelId::parse("vi"), Some(ModelId::VI));
        assert_eq!(ModelId::parse("vii"), None);
    }
}
