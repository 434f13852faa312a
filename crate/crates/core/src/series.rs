//! Observations on the implicit grid t_i = i/n.

use crate::error::{Error, Result};
use crate::numeric;

/// A univariate series Y_1..Y_n observed at the equispaced design points
/// t_i = i/n. Values are stored zero-based; `time(j)` maps slot `j` back to
/// its design point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    /// Rejects empty input and non-finite values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SeriesTooShort { n: 0, min: 1 });
        }
        if let Some(ix) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index: ix });
        }
        Ok(TimeSeries { values })
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

    /// Design point of zero-based slot `j`, i.e. (j + 1) / n.
    pub fn time(&self, j: usize) -> f64 {
        (j + 1) as f64 / self.values.len() as f64
    }

    /// Sample variance of the observations (denominator n - 1).
    pub fn sample_variance(&self) -> f64 {
        numeric::sample_variance(&self.values)
    }
}
