use serde::{Deserialize, Serialize};

use super::{PriorSpec, SviError};
use crate::scm::{Coefficients, FixedSettings, ScmParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideEntry {
    pub name: String,
    /// the guide is Gaussian over `ln x` rather than `x`
    pub log_space: bool,
    pub mean: f64,
    pub log_sd: f64,
}

impl GuideEntry {
    pub fn sd(&self) -> f64 {
        self.log_sd.exp()
    }

    /// Natural-space value of an unconstrained coordinate.
    pub fn to_natural(&self, u: f64) -> f64 {
        if self.log_space {
            u.exp()
        } else {
            u
        }
    }

    /// Posterior mean and sd in natural units.
    pub fn natural_moments(&self) -> (f64, f64) {
        let s = self.sd();
        if self.log_space {
            let mean = (self.mean + 0.5 * s * s).exp();
            (mean, mean * (s * s).exp_m1().sqrt())
        } else {
            (self.mean, s)
        }
    }
}

/// Diagonal Gaussian over the unconstrained coefficient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideState {
    pub harmonic_order: usize,
    pub entries: Vec<GuideEntry>,
}

impl GuideState {
    /// Centred on the prior with a tenth of the prior spread.
    pub fn from_prior(priors: &PriorSpec) -> Self {
        Self::from_prior_scaled(priors, 0.1)
    }

    /// Centred on the prior with sd `factor × prior scale`.
    pub fn from_prior_scaled(priors: &PriorSpec, factor: f64) -> Self {
        Self {
            harmonic_order: priors.harmonic_order,
            entries: priors
                .entries
                .iter()
                .map(|e| GuideEntry {
                    name: e.name.clone(),
                    log_space: e.log_space(),
                    mean: e.unconstrained_mean(),
                    log_sd: (factor * e.scale).ln(),
                })
                .collect(),
        }
    }

    /// Point mass (tiny sd) at a known coefficient set.
    pub fn concentrated(coef: &Coefficients<f64>, priors: &PriorSpec, log_sd: f64) -> Self {
        let mut g = Self::from_prior(priors);
        for (e, x) in g.entries.iter_mut().zip(coef.to_vec()) {
            e.mean = if e.log_space { x.ln() } else { x };
            e.log_sd = log_sd;
        }
        g
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `[means..., log_sds...]`, the coordinates the optimiser updates.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.iter().map(|e| e.mean).collect();
        v.extend(self.entries.iter().map(|e| e.log_sd));
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) -> Result<(), SviError> {
        let d = self.entries.len();
        if v.len() != 2 * d {
            return Err(SviError::Dimension {
                expected: 2 * d,
                got: v.len(),
            });
        }
        for (i, e) in self.entries.iter_mut().enumerate() {
            e.mean = v[i];
            e.log_sd = v[d + i];
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SviError> {
        for e in &self.entries {
            let sd = e.sd();
            if !(sd > 0.0 && sd.is_finite() && e.mean.is_finite()) {
                return Err(SviError::InvalidConfig(format!(
                    "guide entry {} has mean {} and log_sd {}",
                    e.name, e.mean, e.log_sd
                )));
            }
        }
        Ok(())
    }

    /// Natural-space coefficients at unconstrained point `u`.
    pub fn coefficients_at(&self, u: &[f64]) -> Result<Coefficients<f64>, SviError> {
        let natural: Vec<f64> = self.entries.iter().zip(u).map(|(e, &x)| e.to_natural(x)).collect();
        Ok(Coefficients::from_slice(self.harmonic_order, &natural)?)
    }

    /// Coefficients at the guide location, mapped to natural units (the
    /// median for log-space entries).
    pub fn plug_in(&self, fixed: &FixedSettings) -> Result<ScmParams, SviError> {
        let u: Vec<f64> = self.entries.iter().map(|e| e.mean).collect();
        Ok(ScmParams {
            coef: self.coefficients_at(&u)?,
            fixed: fixed.clone(),
        })
    }

    pub fn entry(&self, name: &str) -> Option<&GuideEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}
