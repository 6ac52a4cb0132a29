use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::elbo::{draw_noise, elbo_with_noise};
use super::likelihood::{prepare, PreparedRecord};
use super::{AdamState, GuideState, PriorSpec, SviError};
use crate::data::{CalendarPoint, Dataset, WeatherObservation};
use crate::scm::{equations, CalendarFeatures, FixedSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    /// `None` for full-batch steps
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub n_particles: usize,
    pub learning_rate: f64,
    /// initial guide sd as a fraction of each prior scale
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch_size: None,
            seed: 0,
            n_particles: 1,
            learning_rate: 0.01,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.n_particles == 0 {
            problems.push("n_particles must be at least 1".to_string());
        }
        if self.batch_size == Some(0) {
            problems.push("batch_size must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            problems.push(format!("init_scale must be positive, got {}", self.init_scale));
        }
        problems
    }
}

/// Natural-space posterior mean and sd of one coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentSummary {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub elbo_trace: Vec<f64>,
    pub guide: GuideState,
    pub posterior: BTreeMap<String, LatentSummary>,
    pub seed: u64,
    pub steps_completed: usize,
    pub diverged: bool,
    /// excluded from serialised output so reports stay reproducible
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

pub fn posterior_summary(guide: &GuideState) -> BTreeMap<String, LatentSummary> {
    guide
        .entries
        .iter()
        .map(|e| {
            let (mean, sd) = e.natural_moments();
            (e.name.clone(), LatentSummary { mean, sd })
        })
        .collect()
}

/// Fits the guide by stochastic variational inference. Two consecutive
/// non-finite steps abort training; the report then holds the last good
/// guide and `diverged = true`.
pub fn train(ds: &Dataset, priors: &PriorSpec, fixed: &FixedSettings, config: &TrainConfig) -> Result<TrainReport, SviError> {
    if ds.is_empty() {
        return Err(SviError::EmptyDataset);
    }
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(SviError::InvalidConfig(problems.join("; ")));
    }
    priors.validate()?;
    if priors.harmonic_order != fixed.harmonic_order {
        return Err(SviError::InvalidConfig(format!(
            "priors have harmonic order {}, settings {}",
            priors.harmonic_order, fixed.harmonic_order
        )));
    }
    let started = Instant::now();
    let data = prepare(ds, fixed);
    let n = data.len();
    let all: Vec<&PreparedRecord> = data.iter().collect();
    let batch = config.batch_size.unwrap_or(n).min(n);
    let scale = n as f64 / batch as f64;

    let mut guide = GuideState::from_prior_scaled(priors, config.init_scale);
    let mut adam = AdamState::with_lr(2 * guide.len(), config.learning_rate);
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(config.steps);
    let mut bad_streak = 0;
    let mut diverged = false;

    for _ in 0..config.steps {
        let subset: Vec<&PreparedRecord>;
        let records: &[&PreparedRecord] = if batch == n {
            &all
        } else {
            let mut idx = rand::seq::index::sample(&mut rng, n, batch).into_vec();
            idx.sort_unstable();
            subset = idx.into_iter().map(|i| &data[i]).collect();
            &subset
        };
        let noise = draw_noise(&mut rng, guide.len(), config.n_particles);
        let outcome = elbo_with_noise(records, scale, priors, &guide, fixed, &noise).and_then(|est| {
            let mut flat = guide.to_flat();
            adam.step(&est.grad, &mut flat)?;
            Ok((est.value, flat))
        });
        match outcome {
            Ok((value, flat)) => {
                guide.set_flat(&flat)?;
                trace.push(value);
                bad_streak = 0;
            }
            Err(SviError::NonFinite { .. } | SviError::NonFiniteGradient { .. } | SviError::Grad(_)) => {
                trace.push(f64::NAN);
                bad_streak += 1;
                if bad_streak >= 2 {
                    diverged = true;
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainReport {
        steps_completed: trace.len(),
        elbo_trace: trace,
        posterior: posterior_summary(&guide),
        guide,
        seed: config.seed,
        diverged,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Plug-in point forecast at the guide location and predictive sd equal to
/// the posterior mean of the demand noise sd.
pub fn posterior_predict(
    guide: &GuideState,
    fixed: &FixedSettings,
    cal: CalendarPoint,
    weather: &WeatherObservation,
) -> Result<(f64, f64), SviError> {
    let params = guide.plug_in(fixed)?;
    let mean = crate::scm::predict_demand(cal, weather, &params);
    let sd = guide
        .entry("demand_noise_sd")
        .map(|e| e.natural_moments().0)
        .ok_or_else(|| SviError::MissingLatent("demand_noise_sd".into()))?;
    Ok((mean, sd))
}

/// Predictive mean and sd integrating over `draws` guide samples: the sd
/// combines the spread of the conditional means with the expected noise
/// variance.
pub fn posterior_predict_mc<R: Rng + ?Sized>(
    guide: &GuideState,
    fixed: &FixedSettings,
    cal: CalendarPoint,
    weather: &WeatherObservation,
    rng: &mut R,
    draws: usize,
) -> Result<(f64, f64), SviError> {
    if draws == 0 {
        return Err(SviError::InvalidConfig("draws must be positive".into()));
    }
    let features = CalendarFeatures::new(cal, fixed);
    let (mut sum, mut sum_sq, mut noise_var) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let u: Vec<f64> = guide
            .entries
            .iter()
            .map(|e| e.mean + e.sd() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let c = guide.coefficients_at(&u)?;
        let m = equations::demand_components(&features, weather, &c, fixed).total;
        sum += m;
        sum_sq += m * m;
        noise_var += c.demand_noise_sd * c.demand_noise_sd;
    }
    let k = draws as f64;
    let mean = sum / k;
    let spread = (sum_sq / k - mean * mean).max(0.0);
    Ok((mean, (spread + noise_var / k).sqrt()))
}

/// JSON document written after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub latents: BTreeMap<String, LatentSummary>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub guide: GuideState,
    pub fixed: FixedSettings,
}

impl PosteriorSnapshot {
    pub fn new(report: &TrainReport, fixed: &FixedSettings, config: serde_json::Value) -> Self {
        Self {
            latents: report.posterior.clone(),
            seed: report.seed,
            config,
            guide: report.guide.clone(),
            fixed: fixed.clone(),
        }
    }
}

/// `step,elbo` CSV.
pub fn elbo_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("step,elbo\n");
    for (i, v) in trace.iter().enumerate() {
        writeln!(out, "{i},{v}").expect("writing to a String cannot fail");
    }
    out
}
