//! Change-point analysis for the second-order structure of non-stationary
//! time series.
//!
//! The crate detects and localizes changes in the variance and the lag-k
//! correlation of a series whose mean, variance and dependence structure may
//! all drift smoothly in time. It provides:
//!
//! * classical CUSUM tests ("no change at all vs. some change") built on
//!   nonparametric residuals, with critical values from a block-multiplier
//!   bootstrap ([`cusum`]);
//! * relevant-change tests of the null |jump| <= delta, based on normalized
//!   L2 statistics and a weighted bootstrap ([`relevant`]);
//! * local linear smoothing of mean and variance, a windowed variance-break
//!   locator and a piecewise variance estimate ([`smoothing`]);
//! * minimal-volatility and cross-validation bandwidth selection
//!   ([`bandwidth`]);
//! * a simulator for piecewise locally stationary processes with analytic
//!   second-order oracles ([`sim`]) and a Monte Carlo harness
//!   ([`montecarlo`]).

// Guards of the form `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod cusum;
pub mod error;
pub mod kernel;
pub mod montecarlo;
pub mod numeric;
pub mod relevant;
pub mod report;
pub mod series;
pub mod sim;
pub mod smoothing;

pub use error::{Error, Result};
pub use kernel::{KernelId, KernelSpec};
pub use report::{RelevantTestReport, TestReport};
pub use series::TimeSeries;
