//! Symmetric second-order kernels on [-1, 1] and their cached moments.

use serde::{Deserialize, Serialize};

use crate::numeric::gauss_legendre;

/// Number of quadrature points used for the cached kernel moments.
const QUAD_POINTS: usize = 201;

/// Supported kernel functions. All are symmetric, supported on [-1, 1] and
/// integrate to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    #[default]
    Epanechnikov,
    Biweight,
    Triweight,
}

impl KernelId {
    /// Kernel value at `x`; zero outside [-1, 1].
    pub fn evaluate(self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - x * x;
        match self {
            KernelId::Epanechnikov => 0.75 * u,
            KernelId::Biweight => 15.0 / 16.0 * u * u,
            KernelId::Triweight => 35.0 / 32.0 * u * u * u,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Epanechnikov => "epanechnikov",
            KernelId::Biweight => "biweight",
            KernelId::Triweight => "triweight",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Some(KernelId::Epanechnikov),
            "biweight" | "bi" => Some(KernelId::Biweight),
            "triweight" | "tri" => Some(KernelId::Triweight),
            _ => None,
        }
    }
}

impl std::str::FromStr for KernelId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelId::parse(s).ok_or_else(|| format!("unknown kernel '{s}'"))
    }
}

/// A kernel together with its cached moments
/// mu_l = int x^l K(x) dx and phi_l = int x^l K(x)^2 dx.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub id: KernelId,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mu: Vec<f64>,
    phi: Vec<f64>,
}

impl KernelSpec {
    /// Builds the kernel with its moments of order 0..=4 cached. Panics if the
    /// quadrature mass deviates from one by more than 1e-10, which would
    /// indicate a broken kernel definition.
    pub fn new(id: KernelId) -> Self {
        let (nodes, weights) = gauss_legendre(QUAD_POINTS);
        let moment = |l: u32, square: bool| -> f64 {
            nodes
                .iter()
                .zip(weights.iter())
                .map(|(&x, &w)| {
                    let k = id.evaluate(x);
                    w * x.powi(l as i32) * if square { k * k } else { k }
                })
                .sum()
        };
        let mu: Vec<f64> = (0..=4).map(|l| moment(l, false)).collect();
        let phi: Vec<f64> = (0..=4).map(|l| moment(l, true)).collect();
        assert!(
            (mu[0] - 1.0).abs() < 1e-10,
            "kernel mass {} deviates from 1",
            mu[0]
        );
        KernelSpec {
            id,
            nodes,
            weights,
            mu,
            phi,
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.id.evaluate(x)
    }

    /// mu_l = int x^l K(x) dx.
    pub fn mu(&self, l: usize) -> f64 {
        self.mu[l]
    }

    /// phi_l = int x^l K(x)^2 dx.
    pub fn phi(&self, l: usize) -> f64 {
        self.phi[l]
    }

    /// Boundary moment nu_{j,b}(t) = int_{-t/b}^{(1-t)/b} x^j K(x) dx,
    /// computed on demand with the cached rule mapped onto the (clipped)
    /// integration range.
    pub fn boundary_moment(&self, j: u32, b: f64, t: f64) -> f64 {
        assert!(b > 0.0);
        let lo = (-t / b).max(-1.0);
        let hi = ((1.0 - t) / b).min(1.0);
        if lo >= hi {
            return 0.0;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| {
                let s = mid + half * x;
                w * s.powi(j as i32) * self.id.evaluate(s)
            })
            .sum::<f64>()
            * half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_integrate_to_one() {
        for id in [
            KernelId::Epanechnikov,
            KernelId::Biweight,
            KernelId::Triweight,
        ] {
            let spec = KernelSpec::new(id);
            assert!((spec.mu(0) - 1.0).abs() < 1e-12, "{id:?}");
        }
    }

    #[test]
    fn kernels_are_symmetric_with_compact_support() {
        for id in [
            KernelId::Epanechnikov,
            KernelId::Biweight,
            KernelId::Triweight,
        ] {
            for &x in &[0.1, 0.33, 0.77, 0.99] {
                assert_eq!(id.evaluate(x), id.evaluate(-x));
            }
            assert_eq!(id.evaluate(1.0), 0.0);
            assert_eq!(id.evaluate(-1.3), 0.0);
            let spec = KernelSpec::new(id);
            assert!(spec.mu(1).abs() < 1e-14);
            assert!(spec.mu(3).abs() < 1e-14);
        }
    }

    #[test]
    fn cached_moments_match_closed_forms() {
        let epa = KernelSpec::new(KernelId::Epanechnikov);
        assert!((epa.mu(2) - 0.2).abs() < 1e-12);
        assert!((epa.phi(0) - 0.6).abs() < 1e-12);
        let bi = KernelSpec::new(KernelId::Biweight);
        assert!((bi.mu(2) - 1.0 / 7.0).abs() < 1e-12);
        let tri = KernelSpec::new(KernelId::Triweight);
        assert!((tri.mu(2) - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_moment_recovers_full_moments_in_the_interior() {
        let spec = KernelSpec::new(KernelId::Epanechnikov);
        // At t = 0.5 with b = 0.1 the range covers the whole support.
        for j in 0..3 {
            let full = spec.mu(j as usize);
            assert!((spec.boundary_moment(j, 0.1, 0.5) - full).abs() < 1e-12);
        }
        // At the left edge only [0, 1] contributes.
        let half_mass = spec.boundary_moment(0, 0.1, 0.0);
        assert!((half_mass - 0.5).abs() < 1e-12);
        assert!(spec.boundary_moment(1, 0.1, 0.0) > 0.0);
    }
}
