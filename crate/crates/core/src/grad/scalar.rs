use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{special, Var};

/// Numeric type the structural equations are written against: plain `f64`
/// for simulation and prediction, [`Var`] when a gradient is needed.
///
/// Data enter expressions as `f64` on the right-hand side (`x * 2.0`), which
/// keeps constants off the tape.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn softplus(self) -> Self;
    fn ln_gamma(self) -> Self;
    fn log_ndtr(self) -> Self;

    /// `bias + Σ coef·x`. `terms` must be non-empty.
    fn affine(terms: &[(Self, f64)], bias: f64) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn softplus(self) -> Self {
        special::softplus(self)
    }
    fn ln_gamma(self) -> Self {
        special::ln_gamma(self)
    }
    fn log_ndtr(self) -> Self {
        special::log_ndtr(self)
    }
    fn affine(terms: &[(Self, f64)], bias: f64) -> Self {
        terms.iter().fold(bias, |acc, &(x, c)| acc + c * x)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(&self) -> f64 {
        Var::value(self)
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn ln(self) -> Self {
        Var::ln(self)
    }
    fn abs(self) -> Self {
        Var::abs(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    fn softplus(self) -> Self {
        Var::softplus(self)
    }
    fn ln_gamma(self) -> Self {
        Var::ln_gamma(self)
    }
    fn log_ndtr(self) -> Self {
        Var::log_ndtr(self)
    }
    fn affine(terms: &[(Self, f64)], bias: f64) -> Self {
        let tape = terms
            .first()
            .expect("affine over an empty term list")
            .0
            .tape();
        tape.affine(terms, bias)
    }
}

/// Gaussian log-density of observation `x` under `Normal(mean, sd)`.
pub fn normal_ln_pdf<S: Scalar>(x: f64, mean: S, sd: S) -> S {
    let z = (mean - x) / sd;
    -(sd.ln()) - z * z * 0.5 - special::LN_SQRT_2PI
}

/// Log-density of `x ∈ (0, 1)` under `Beta(alpha, beta)`.
pub fn beta_ln_pdf<S: Scalar>(x: f64, alpha: S, beta: S) -> S {
    let norm = (alpha + beta).ln_gamma() - alpha.ln_gamma() - beta.ln_gamma();
    norm + (alpha - 1.0) * x.ln() + (beta - 1.0) * (1.0 - x).ln()
}

/// Log-likelihood of `x` under `max(0, Normal(mean, sd))`: the density for
/// `x > 0`, the censored mass `Φ(−mean/sd)` at zero.
pub fn rectified_normal_ln_pdf<S: Scalar>(x: f64, mean: S, sd: S) -> S {
    if x > 0.0 {
        normal_ln_pdf(x, mean, sd)
    } else {
        (-(mean / sd)).log_ndtr()
    }
}
