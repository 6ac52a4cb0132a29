use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ols::{solve_ols, Design};
use super::AnalysisError;

/// Linear-Gaussian model with a discrete confounder:
///
/// z ~ P(z),  x = x_intercept + x_from_z·z + ε_x,  y = y_intercept + effect·x + y_from_z·z + ε_y
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScmInstance {
    pub z_support: Vec<f64>,
    pub z_probs: Vec<f64>,
    pub x_intercept: f64,
    pub x_from_z: f64,
    pub x_noise_sd: f64,
    pub y_intercept: f64,
    pub effect: f64,
    pub y_from_z: f64,
    pub y_noise_sd: f64,
}

impl Default for LinearScmInstance {
    /// y = 2x + 3z + ε, x = z + ε′, z uniform on {0, 1}.
    fn default() -> Self {
        Self {
            z_support: vec![0.0, 1.0],
            z_probs: vec![0.5, 0.5],
            x_intercept: 0.0,
            x_from_z: 1.0,
            x_noise_sd: 1.0,
            y_intercept: 0.0,
            effect: 2.0,
            y_from_z: 3.0,
            y_noise_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LinearScmInstance {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let mut problems = Vec::new();
        if self.z_support.is_empty() || self.z_support.len() != self.z_probs.len() {
            problems.push("z support and probabilities must be non-empty and the same length".to_string());
        }
        if self.z_probs.iter().any(|p| !(*p >= 0.0)) {
            problems.push("z probabilities must be non-negative".to_string());
        }
        let total: f64 = self.z_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            problems.push(format!("z probabilities sum to {total}, not 1"));
        }
        if !(self.x_noise_sd >= 0.0 && self.y_noise_sd >= 0.0) {
            problems.push("noise scales must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(AnalysisError::Shape(problems.join("; ")))
        }
    }

    pub fn z_mean(&self) -> f64 {
        self.z_support.iter().zip(&self.z_probs).map(|(z, p)| z * p).sum()
    }

    pub fn z_variance(&self) -> f64 {
        let m = self.z_mean();
        self.z_support.iter().zip(&self.z_probs).map(|(z, p)| p * (z - m).powi(2)).sum()
    }

    /// E[y | do(x)] = Σ_z E[y | x, z] P(z) = effect·x + (y_intercept + y_from_z·E[z]),
    /// returned as (slope, intercept).
    pub fn do_expectation(&self) -> (f64, f64) {
        (self.effect, self.y_intercept + self.y_from_z * self.z_mean())
    }

    /// Population slope of y on x alone: effect + y_from_z·cov(x, z)/var(x).
    pub fn naive_slope(&self) -> f64 {
        let vz = self.z_variance();
        let cov_xz = self.x_from_z * vz;
        let var_x = self.x_from_z.powi(2) * vz + self.x_noise_sd.powi(2);
        self.effect + self.y_from_z * cov_xz / var_x
    }

    /// Observational draws, or interventional ones when `set_x` fixes x.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, set_x: Option<f64>, rng: &mut R) -> Sample {
        let pick = WeightedIndex::new(&self.z_probs).expect("validated probabilities");
        let mut s = Sample {
            z: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let z = self.z_support[pick.sample(rng)];
            let ex: f64 = rng.sample(StandardNormal);
            let ey: f64 = rng.sample(StandardNormal);
            let x = set_x.unwrap_or(self.x_intercept + self.x_from_z * z + self.x_noise_sd * ex);
            let y = self.y_intercept + self.effect * x + self.y_from_z * z + self.y_noise_sd * ey;
            s.z.push(z);
            s.x.push(x);
            s.y.push(y);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackdoorResult {
    pub n: usize,
    pub seed: u64,
    /// coefficient on x in y ~ 1 + x + indicators of z
    pub regression_coef: f64,
    pub regression_se: f64,
    pub do_coef: f64,
    pub abs_diff: f64,
    /// coefficient on x in y ~ 1 + x
    pub naive_coef: f64,
    pub naive_se: f64,
    pub naive_population: f64,
}

/// Adjusted regression versus the analytic interventional slope. The
/// confounder enters as indicators of its observed levels, which is the
/// regression form of Σ_z P(y | x, z) P(z).
pub fn backdoor_check(instance: &LinearScmInstance, n: usize, seed: u64) -> Result<BackdoorResult, AnalysisError> {
    instance.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = instance.sample(n, None, &mut rng);

    let mut levels: Vec<f64> = s.z.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut adjusted = Design::with_intercept(n).column("x", s.x.clone());
    for (k, level) in levels.iter().enumerate().skip(1) {
        adjusted = adjusted.column(
            format!("z_level_{k}"),
            s.z.iter().map(|z| if z == level { 1.0 } else { 0.0 }).collect(),
        );
    }
    let fit = solve_ols(&adjusted, &s.y)?;
    let naive = solve_ols(&Design::with_intercept(n).column("x", s.x.clone()), &s.y)?;
    let (do_coef, _) = instance.do_expectation();
    let regression_coef = fit.coef("x").expect("column present");
    Ok(BackdoorResult {
        n,
        seed,
        regression_coef,
        regression_se: fit.se("x").expect("column present"),
        do_coef,
        abs_diff: (regression_coef - do_coef).abs(),
        naive_coef: naive.coef("x").expect("column present"),
        naive_se: naive.se("x").expect("column present"),
        naive_population: instance.naive_slope(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjusted_regression_matches_do_coefficient() {
        let inst = LinearScmInstance::default();
        let r = backdoor_check(&inst, 100_000, 1).unwrap();
        assert_eq!(r.do_coef, 2.0);
        assert!(r.abs_diff <= 2.0 * r.regression_se, "{r:?}");
        assert!((r.naive_coef - r.do_coef).abs() >= 0.5);
        // closed form: 2 + 3·(1/4)/(1/4 + 1) = 2.6
        assert!((inst.naive_slope() - 2.6).abs() < 1e-12);
        assert!((r.naive_coef - 2.6).abs() < 4.0 * r.naive_se);
    }

    #[test]
    fn simulated_intervention_agrees_with_analytic_slope() {
        let inst = LinearScmInstance::default();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = 200_000;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let lo = inst.sample(n, Some(0.0), &mut rng);
        let hi = inst.sample(n, Some(1.0), &mut rng);
        let slope = mean(&hi.y) - mean(&lo.y);
        // var(y | do(x)) = 9/4 + 1, so the difference has sd √(2·3.25/n)
        let se = (2.0 * 3.25 / n as f64).sqrt();
        assert!((slope - 2.0).abs() < 4.0 * se);
        let (_, intercept) = inst.do_expectation();
        assert!((mean(&lo.y) - intercept).abs() < 4.0 * (3.25 / n as f64).sqrt());
    }

    #[test]
    fn without_confounding_naive_agrees() {
        let inst = LinearScmInstance {
            x_from_z: 0.0,
            ..LinearScmInstance::default()
        };
        let r = backdoor_check(&inst, 20_000, 5).unwrap();
        assert!((r.naive_coef - r.regression_coef).abs() < 2.0 * r.naive_se);
    }

    #[test]
    fn error_shrinks_with_sample_size() {
        let inst = LinearScmInstance::default();
        let median = |n: usize| {
            let mut d: Vec<f64> = (0..3).map(|s| backdoor_check(&inst, n, 100 + s).unwrap().abs_diff).collect();
            d.sort_by(f64::total_cmp);
            d[1]
        };
        let m: Vec<f64> = [1_000, 10_000, 100_000].into_iter().map(median).collect();
        assert!(m[0] > m[1] && m[1] > m[2], "{m:?}");
    }

    #[test]
    fn three_level_confounder() {
        let inst = LinearScmInstance {
            z_support: vec![-1.0, 0.0, 2.0],
            z_probs: vec![0.2, 0.5, 0.3],
            ..LinearScmInstance::default()
        };
        let r = backdoor_check(&inst, 50_000, 8).unwrap();
        assert!(r.abs_diff <= 3.0 * r.regression_se);
    }

    #[test]
    fn probabilities_must_sum_to_one() {
        let inst = LinearScmInstance {
            z_probs: vec![0.5, 0.6],
            ..LinearScmInstance::default()
        };
        assert!(backdoor_check(&inst, 100, 0).is_err());
    }
}
