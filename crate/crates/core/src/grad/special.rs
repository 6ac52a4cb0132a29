//! Scalar special functions shared by the f64 and tape code paths.

use std::f64::consts::PI;

use statrs::function::{erf, gamma};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn digamma(x: f64) -> f64 {
    gamma::digamma(x)
}

/// `ln Φ(x)` for the standard normal CDF, stable far into the lower tail.
pub fn log_ndtr(x: f64) -> f64 {
    if x > -20.0 {
        (0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic expansion of the Mills ratio.
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// `d/dx ln Φ(x) = φ(x) / Φ(x)`.
pub fn d_log_ndtr(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - log_ndtr(x)).exp()
}

pub fn normal_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -sd.ln() - LN_SQRT_2PI - 0.5 * z * z
}

pub fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
