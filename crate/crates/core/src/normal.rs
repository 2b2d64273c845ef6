//! Standard normal distribution helpers.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// `1 / sqrt(2 pi)`.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `Phi(z)`, computed from `erfc` so that the lower tail keeps full relative accuracy.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper tail `1 - Phi(z)` without cancellation.
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// `Phi^{-1}(p)` for `p` in `(0, 1)`.
///
/// Starts from the `erfc_inv` approximation and polishes with Newton steps
/// against the full-precision CDF.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..3 {
        let density = pdf(z);
        if density <= 0.0 || !z.is_finite() {
            break;
        }
        // Work in the smaller tail to keep the residual accurate.
        let residual = if p < 0.5 { cdf(z) - p } else { (1.0 - p) - sf(z) };
        z -= residual / density;
    }
    z
}

/// `P(lo <= Z <= hi)` for a standard normal, using the tail that avoids cancellation.
pub fn interval_probability(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo > 0.0 {
        sf(lo) - sf(hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}

pub(crate) fn log_2pi() -> f64 {
    (2.0 * PI).ln()
}
