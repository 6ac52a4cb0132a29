use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SviError;
use crate::grad::special::{normal_ln_pdf, LN_SQRT_2PI};
use crate::scm::{Coefficients, ScmParams, POSITIVE_FIELDS};

/// Scale for weather-link coefficients (°F, shape units).
pub const SIGMA1: f64 = 4.0;
/// Base scale for radiation amplitudes; squared for MW-level coefficients.
pub const SIGMA2: f64 = 40.0;
/// Scale for the daily temperature cycle.
pub const SIGMA3: f64 = 10.0;
/// Log-space scale of every LogNormal prior.
pub const LOG_SCALE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Normal,
    /// `ln x ~ Normal(location, scale)`
    LogNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorEntry {
    pub name: String,
    pub family: Family,
    pub location: f64,
    pub scale: f64,
}

impl PriorEntry {
    /// Density of the natural-space value.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.family {
            Family::Normal => normal_ln_pdf(x, self.location, self.scale),
            Family::LogNormal if x > 0.0 => normal_ln_pdf(x.ln(), self.location, self.scale) - x.ln(),
            Family::LogNormal => f64::NEG_INFINITY,
        }
    }

    /// Density of the unconstrained coordinate the guide lives on
    /// (`ln x` for LogNormal entries).
    pub fn ln_pdf_unconstrained(&self, u: f64) -> f64 {
        let z = (u - self.location) / self.scale;
        -0.5 * z * z - self.scale.ln() - LN_SQRT_2PI
    }

    /// Prior mean of the unconstrained coordinate.
    pub fn unconstrained_mean(&self) -> f64 {
        self.location
    }

    pub fn log_space(&self) -> bool {
        self.family == Family::LogNormal
    }
}

/// One prior per trainable coefficient, in the flat order of
/// [`Coefficients::names`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub harmonic_order: usize,
    pub entries: Vec<PriorEntry>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::new(2)
    }
}

impl PriorSpec {
    /// Published priors, centred on the default parameter set. Harmonics
    /// beyond order two get zero-centred priors with the same scale.
    pub fn new(order: usize) -> Self {
        let mut base = ScmParams::prior_means().coef;
        let pad = |s: &mut Vec<[f64; 2]>| s.resize(order, [0.0, 0.0]);
        pad(&mut base.temp_month_harmonics);
        pad(&mut base.temp_hour_harmonics);
        pad(&mut base.daily_harmonics);
        pad(&mut base.yearly_harmonics);
        Self::centred_on(&base)
    }

    /// Same families and scales, locations taken from `coef`.
    pub fn centred_on(coef: &Coefficients<f64>) -> Self {
        let order = coef.harmonic_order();
        let names = Coefficients::<f64>::names(order);
        let scales = Self::scales(order);
        let entries = names
            .into_iter()
            .zip(coef.to_vec())
            .zip(scales)
            .map(|((name, loc), scale)| {
                if POSITIVE_FIELDS.contains(&name.as_str()) {
                    PriorEntry {
                        name,
                        family: Family::LogNormal,
                        location: loc.ln(),
                        scale: LOG_SCALE,
                    }
                } else {
                    PriorEntry {
                        name,
                        family: Family::Normal,
                        location: loc,
                        scale,
                    }
                }
            })
            .collect();
        Self {
            harmonic_order: order,
            entries,
        }
    }

    fn scales(order: usize) -> Vec<f64> {
        let mw = SIGMA2 * SIGMA2;
        let s = Coefficients {
            temp_month_harmonics: vec![[SIGMA1; 2]; order],
            temp_hour_harmonics: vec![[SIGMA3; 2]; order],
            rad_to_temp: SIGMA1,
            temp_base: SIGMA1,
            temp_noise_sd: LOG_SCALE,
            humid_hour: [SIGMA1; 2],
            humid_month: [SIGMA1; 2],
            humid_offsets: [SIGMA1; 2],
            rad_amp: [SIGMA2; 2],
            rad_noise_sd: LOG_SCALE,
            wind_mean: mw,
            wind_sd: LOG_SCALE,
            hvac_slope: mw,
            demand_base: mw,
            humid_coeff: mw,
            wind_coeff: mw,
            wind_asymmetry: LOG_SCALE,
            daily_harmonics: vec![[mw; 2]; order],
            yearly_harmonics: vec![[mw; 2]; order],
            light_coeff: mw,
            light_decay: LOG_SCALE,
            demand_noise_sd: LOG_SCALE,
        };
        s.to_vec()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn validate(&self) -> Result<(), SviError> {
        let expected = Coefficients::<f64>::names(self.harmonic_order);
        let got: Vec<String> = self.entries.iter().map(|e| e.name.clone()).collect();
        if got != expected {
            return Err(SviError::InvalidConfig(
                "prior names do not match the trainable coefficients".into(),
            ));
        }
        for e in &self.entries {
            if !(e.scale > 0.0 && e.scale.is_finite() && e.location.is_finite()) {
                return Err(SviError::InvalidConfig(format!(
                    "prior for {} has location {} and scale {}",
                    e.name, e.location, e.scale
                )));
            }
        }
        Ok(())
    }
}

/// Sum of prior log-densities of natural-space values. Every prior entry
/// must be present in `latents`; extra keys are ignored.
pub fn log_prior(latents: &BTreeMap<String, f64>, priors: &PriorSpec) -> Result<f64, SviError> {
    priors.entries.iter().try_fold(0.0, |acc, e| {
        let x = latents
            .get(&e.name)
            .ok_or_else(|| SviError::MissingLatent(e.name.clone()))?;
        Ok(acc + e.ln_pdf(*x))
    })
}

/// Named natural-space values of a coefficient set.
pub fn latent_map(coef: &Coefficients<f64>) -> BTreeMap<String, f64> {
    Coefficients::<f64>::names(coef.harmonic_order())
        .into_iter()
        .zip(coef.to_vec())
        .collect()
}
