//! Structural causal model of hourly demand.
//!
//! Calendar (hour, month) drives radiation, temperature, humidity and wind;
//! demand is the sum of HVAC (temperature, humidity, wind), lighting
//! (radiation, active hours) and activity (daily and yearly cycles) terms.
//!
//! The equations in [`equations`] are generic over [`Scalar`](crate::grad::Scalar)
//! so the same code serves simulation, prediction and the differentiable
//! likelihood.

pub mod equations;
mod sample;
mod solar;

use serde::{Deserialize, Serialize};

use crate::data::{CalendarPoint, WeatherObservation};

pub use equations::{CalendarFeatures, DemandBreakdown};
pub use sample::{sample_record, sample_weather_and_demand, simulate};
pub use solar::{SolarTable, STATION_LATITUDE, STATION_LONGITUDE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScmError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("expected {expected} latent values, got {got}")]
    Length { expected: usize, got: usize },
}

/// Learnable coefficients. Harmonic series are stored as `[sin, cos]` pairs
/// per order `j = 1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients<S> {
    /// c_j, c*_j (°F)
    pub temp_month_harmonics: Vec<[S; 2]>,
    /// d_j, d*_j (°F)
    pub temp_hour_harmonics: Vec<[S; 2]>,
    /// °F per W/m²
    pub rad_to_temp: S,
    pub temp_base: S,
    pub temp_noise_sd: S,
    /// θ, θ*
    pub humid_hour: [S; 2],
    /// φ, φ*
    pub humid_month: [S; 2],
    /// α0, β0
    pub humid_offsets: [S; 2],
    /// p, q (W/m²)
    pub rad_amp: [S; 2],
    pub rad_noise_sd: S,
    pub wind_mean: S,
    pub wind_sd: S,
    /// MW per °F away from the midpoint
    pub hvac_slope: S,
    pub demand_base: S,
    /// MW per unit of fractional humidity above the humidity threshold
    pub humid_coeff: S,
    /// MW per mph
    pub wind_coeff: S,
    /// ratio of hot-side to cold-side wind sensitivity
    pub wind_asymmetry: S,
    pub daily_harmonics: Vec<[S; 2]>,
    pub yearly_harmonics: Vec<[S; 2]>,
    pub light_coeff: S,
    /// per W/m²
    pub light_decay: S,
    pub demand_noise_sd: S,
}

/// Coefficients that must stay positive; these are trained in log space.
pub const POSITIVE_FIELDS: [&str; 6] = [
    "temp_noise_sd",
    "rad_noise_sd",
    "wind_sd",
    "wind_asymmetry",
    "light_decay",
    "demand_noise_sd",
];

impl<S: Copy> Coefficients<S> {
    pub fn harmonic_order(&self) -> usize {
        self.temp_month_harmonics.len()
    }

    /// Flat names, in the order of [`Coefficients::to_vec`].
    pub fn names(order: usize) -> Vec<String> {
        let mut names = Vec::new();
        let series = |names: &mut Vec<String>, prefix: &str| {
            for j in 1..=order {
                names.push(format!("{prefix}_sin_{j}"));
                names.push(format!("{prefix}_cos_{j}"));
            }
        };
        series(&mut names, "temp_month");
        series(&mut names, "temp_hour");
        for n in [
            "rad_to_temp",
            "temp_base",
            "temp_noise_sd",
            "humid_hour_sin",
            "humid_hour_cos",
            "humid_month_sin",
            "humid_month_cos",
            "humid_alpha0",
            "humid_beta0",
            "rad_amp_p",
            "rad_amp_q",
            "rad_noise_sd",
            "wind_mean",
            "wind_sd",
            "hvac_slope",
            "demand_base",
            "humid_coeff",
            "wind_coeff",
            "wind_asymmetry",
        ] {
            names.push(n.to_string());
        }
        series(&mut names, "daily");
        series(&mut names, "yearly");
        for n in ["light_coeff", "light_decay", "demand_noise_sd"] {
            names.push(n.to_string());
        }
        names
    }

    pub fn to_vec(&self) -> Vec<S> {
        let mut v = Vec::new();
        let flat = |v: &mut Vec<S>, s: &[[S; 2]]| s.iter().for_each(|p| v.extend_from_slice(p));
        flat(&mut v, &self.temp_month_harmonics);
        flat(&mut v, &self.temp_hour_harmonics);
        v.extend_from_slice(&[self.rad_to_temp, self.temp_base, self.temp_noise_sd]);
        v.extend_from_slice(&self.humid_hour);
        v.extend_from_slice(&self.humid_month);
        v.extend_from_slice(&self.humid_offsets);
        v.extend_from_slice(&self.rad_amp);
        v.extend_from_slice(&[
            self.rad_noise_sd,
            self.wind_mean,
            self.wind_sd,
            self.hvac_slope,
            self.demand_base,
            self.humid_coeff,
            self.wind_coeff,
            self.wind_asymmetry,
        ]);
        flat(&mut v, &self.daily_harmonics);
        flat(&mut v, &self.yearly_harmonics);
        v.extend_from_slice(&[self.light_coeff, self.light_decay, self.demand_noise_sd]);
        v
    }

    pub fn from_slice(order: usize, v: &[S]) -> Result<Self, ScmError> {
        let expected = Self::len_for(order);
        if v.len() != expected {
            return Err(ScmError::Length {
                expected,
                got: v.len(),
            });
        }
        let mut it = v.iter().copied();
        let mut next = || it.next().expect("length checked");
        let series = |next: &mut dyn FnMut() -> S| (0..order).map(|_| [next(), next()]).collect::<Vec<_>>();
        let temp_month_harmonics = series(&mut next);
        let temp_hour_harmonics = series(&mut next);
        let (rad_to_temp, temp_base, temp_noise_sd) = (next(), next(), next());
        let humid_hour = [next(), next()];
        let humid_month = [next(), next()];
        let humid_offsets = [next(), next()];
        let rad_amp = [next(), next()];
        let rad_noise_sd = next();
        let wind_mean = next();
        let wind_sd = next();
        let hvac_slope = next();
        let demand_base = next();
        let humid_coeff = next();
        let wind_coeff = next();
        let wind_asymmetry = next();
        let daily_harmonics = series(&mut next);
        let yearly_harmonics = series(&mut next);
        Ok(Self {
            temp_month_harmonics,
            temp_hour_harmonics,
            rad_to_temp,
            temp_base,
            temp_noise_sd,
            humid_hour,
            humid_month,
            humid_offsets,
            rad_amp,
            rad_noise_sd,
            wind_mean,
            wind_sd,
            hvac_slope,
            demand_base,
            humid_coeff,
            wind_coeff,
            wind_asymmetry,
            daily_harmonics,
            yearly_harmonics,
            light_coeff: next(),
            light_decay: next(),
            demand_noise_sd: next(),
        })
    }

    pub fn len_for(order: usize) -> usize {
        8 * order + 22
    }
}

/// Quantities held fixed during variational training: the V-shape midpoint,
/// indicator thresholds, active hours and the solar table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSettings {
    pub harmonic_order: usize,
    /// T_mid (°F)
    pub temp_mid: f64,
    /// T_RH (°F)
    pub humid_temp_threshold: f64,
    /// T_w1 (°F)
    pub wind_cold_threshold: f64,
    /// T_w2 (°F)
    pub wind_hot_threshold: f64,
    /// local hours with lighting demand
    pub active_hours: Vec<u8>,
    pub solar_table: SolarTable,
}

impl Default for FixedSettings {
    fn default() -> Self {
        Self {
            harmonic_order: 2,
            temp_mid: 56.0,
            humid_temp_threshold: 70.0,
            wind_cold_threshold: 30.0,
            wind_hot_threshold: 75.0,
            active_hours: (5..=23).collect(),
            solar_table: SolarTable::default(),
        }
    }
}

impl FixedSettings {
    pub fn is_active(&self, hour: u32) -> bool {
        self.active_hours.iter().any(|&h| h as u32 == hour)
    }
}

/// Complete parameter set of the generative model. Serialises to one flat
/// JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmParams {
    #[serde(flatten)]
    pub coef: Coefficients<f64>,
    #[serde(flatten)]
    pub fixed: FixedSettings,
}

impl Default for ScmParams {
    fn default() -> Self {
        Self::prior_means()
    }
}

impl ScmParams {
    /// Prior means for every coefficient with a published prior; the
    /// remaining coefficients get the documented defaults.
    pub fn prior_means() -> Self {
        let coef = Coefficients {
            temp_month_harmonics: vec![[-4.6, 6.4], [-1.6, -0.86]],
            temp_hour_harmonics: vec![[-17.0, -22.0], [-2.3, -2.6]],
            rad_to_temp: 0.01,
            temp_base: 47.0,
            temp_noise_sd: 9.0,
            humid_hour: [0.5, -0.7],
            humid_month: [0.3, -0.3],
            humid_offsets: [5.1, 7.6],
            rad_amp: [500.0, 300.0],
            rad_noise_sd: 167.0,
            wind_mean: 16.0,
            wind_sd: 8.0,
            hvac_slope: 20.0,
            demand_base: 3485.0,
            humid_coeff: 500.0,
            wind_coeff: 5.0,
            wind_asymmetry: 1.0,
            daily_harmonics: vec![[-150.0, 136.0], [84.0, 7.0]],
            yearly_harmonics: vec![[-15.0, 110.0], [55.0, 45.0]],
            light_coeff: 150.0,
            light_decay: 0.01,
            demand_noise_sd: 150.0,
        };
        Self {
            coef,
            fixed: FixedSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScmError> {
        let mut problems = Vec::new();
        let c = &self.coef;
        let n = self.fixed.harmonic_order;
        if n < 1 {
            problems.push("harmonic_order must be at least 1".to_string());
        }
        for (name, len) in [
            ("temp_month_harmonics", c.temp_month_harmonics.len()),
            ("temp_hour_harmonics", c.temp_hour_harmonics.len()),
            ("daily_harmonics", c.daily_harmonics.len()),
            ("yearly_harmonics", c.yearly_harmonics.len()),
        ] {
            if len != n {
                problems.push(format!("{name} has {len} terms, harmonic_order is {n}"));
            }
        }
        for (name, v) in [
            ("temp_noise_sd", c.temp_noise_sd),
            ("rad_noise_sd", c.rad_noise_sd),
            ("wind_sd", c.wind_sd),
            ("demand_noise_sd", c.demand_noise_sd),
            ("wind_asymmetry", c.wind_asymmetry),
        ] {
            if !(v > 0.0) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if c.to_vec().iter().any(|v| !v.is_finite()) {
            problems.push("non-finite coefficient".into());
        }
        let f = &self.fixed;
        if !(f.wind_cold_threshold < f.wind_hot_threshold) {
            problems.push(format!(
                "wind_cold_threshold {} must be below wind_hot_threshold {}",
                f.wind_cold_threshold, f.wind_hot_threshold
            ));
        }
        if f.active_hours.iter().any(|&h| h > 23) {
            problems.push("active_hours must lie in 0..=23".into());
        }
        if let Err(e) = f.solar_table.validate() {
            problems.push(format!("solar_table: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScmError::Invalid(problems.join("; ")))
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScmError> {
        let p: Self = serde_json::from_str(text).map_err(|e| ScmError::Invalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialise")
    }
}

/// V-shaped temperature transform `|t − t_mid|`.
pub fn transform_temperature(t: f64, t_mid: f64) -> f64 {
    (t - t_mid).abs()
}

/// Mean of the temperature equation at a calendar point and radiation level.
pub fn temp_mean(cal: CalendarPoint, rad: f64, params: &ScmParams) -> f64 {
    let f = CalendarFeatures::new(cal, &params.fixed);
    equations::temp_mean(&f, rad, &params.coef)
}

/// Beta shape parameters of the humidity distribution.
pub fn humidity_shapes(cal: CalendarPoint, params: &ScmParams) -> (f64, f64) {
    let f = CalendarFeatures::new(cal, &params.fixed);
    equations::humidity_shapes(&f, &params.coef)
}

pub fn radiation_mean(cal: CalendarPoint, params: &ScmParams) -> f64 {
    let f = CalendarFeatures::new(cal, &params.fixed);
    equations::radiation_mean(&f, &params.coef)
}

pub fn demand_components(cal: CalendarPoint, weather: &WeatherObservation, params: &ScmParams) -> DemandBreakdown<f64> {
    let f = CalendarFeatures::new(cal, &params.fixed);
    equations::demand_components(&f, weather, &params.coef, &params.fixed)
}

/// Conditional mean demand given observed covariates.
pub fn predict_demand(cal: CalendarPoint, weather: &WeatherObservation, params: &ScmParams) -> f64 {
    demand_components(cal, weather, params).total
}
