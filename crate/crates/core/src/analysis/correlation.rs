use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::grad::special::standard_normal_pdf;

/// Approximate confidence density of a correlation coefficient from
/// `atanh r ~ N(atanh ρ, 1/(n − 3))`, mapped back to the ρ scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDensity {
    pub r: f64,
    pub n: usize,
}

/// Half-width of the integration window in units of the z-scale sd.
const WINDOW_SDS: f64 = 12.0;

impl CorrelationDensity {
    pub fn new(r: f64, n: usize) -> Result<Self, AnalysisError> {
        if n < 4 {
            return Err(AnalysisError::TooFew { needed: 4, got: n });
        }
        if !(r.abs() < 1.0) {
            return Err(AnalysisError::Boundary(format!(
                "correlation {r} is on the boundary; the density is degenerate"
            )));
        }
        Ok(Self { r, n })
    }

    fn z_sd(&self) -> f64 {
        1.0 / ((self.n - 3) as f64).sqrt()
    }

    pub fn density(&self, rho: f64) -> f64 {
        if !(rho.abs() < 1.0) {
            return 0.0;
        }
        let root = ((self.n - 3) as f64).sqrt();
        root * standard_normal_pdf(root * (rho.atanh() - self.r.atanh())) / (1.0 - rho * rho)
    }

    /// Maximiser of the density on the ρ scale. The stationarity condition
    /// `(n − 3)(atanh ρ − atanh r) = 2ρ` is solved in z = atanh ρ; a grid scan
    /// picks the right root when small `n` makes it non-unique.
    pub fn mode(&self) -> f64 {
        let m = (self.n - 3) as f64;
        let a = self.r.atanh();
        let log_density = |z: f64| -0.5 * m * (z - a).powi(2) + 2.0 * z.cosh().ln();
        let stationarity = |z: f64| m * (z - a) - 2.0 * z.tanh();
        let half = WINDOW_SDS * self.z_sd() + 3.0;
        let steps = 4000;
        let h = 2.0 * half / steps as f64;
        let best = (0..=steps)
            .map(|i| a - half + i as f64 * h)
            .max_by(|x, y| log_density(*x).total_cmp(&log_density(*y)))
            .expect("grid is non-empty");
        // bisect on the stationarity condition within one grid cell either side
        let (mut lo, mut hi) = (best - h, best + h);
        if stationarity(lo) > 0.0 || stationarity(hi) < 0.0 {
            return best.tanh();
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stationarity(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).tanh()
    }

    /// ∫ density over [lo, hi] by adaptive Simpson on the ρ scale, restricted
    /// to the window carrying all but a negligible tail of the mass.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let a = self.r.atanh();
        let w = WINDOW_SDS * self.z_sd();
        let lo = lo.max((a - w).tanh());
        let hi = hi.min((a + w).tanh());
        if !(hi > lo) {
            return 0.0;
        }
        // start from uniform panels so the narrow peak is never stepped over
        let panels = 64;
        let h = (hi - lo) / panels as f64;
        let f = |x: f64| self.density(x);
        (0..panels)
            .map(|i| {
                let (x0, x1) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
                let (f0, f1, fm) = (f(x0), f(x1), f(0.5 * (x0 + x1)));
                let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
                adaptive_simpson(&f, x0, x1, f0, fm, f1, whole, 1e-10, 40)
            })
            .sum()
    }

    pub fn integrate(&self) -> f64 {
        self.mass(-1.0, 1.0)
    }

    /// Central interval of the given coverage, mapped from the z scale.
    pub fn interval(&self, coverage: f64) -> (f64, f64) {
        use statrs::distribution::{ContinuousCDF, Normal};
        let q = Normal::standard().inverse_cdf(0.5 + coverage / 2.0);
        let a = self.r.atanh();
        ((a - q * self.z_sd()).tanh(), (a + q * self.z_sd()).tanh())
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::Shape(format!("lengths {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn correlation_with_density(x: &[f64], y: &[f64]) -> Result<(f64, CorrelationDensity), AnalysisError> {
    if x.len() < 4 {
        return Err(AnalysisError::TooFew { needed: 4, got: x.len() });
    }
    let r = pearson(x, y)?;
    let density = CorrelationDensity::new(r, x.len())?;
    Ok((r, density))
}
