use std::f64::consts::PI;

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, HourlyRecord, TzRule, WeatherObservation};

/// One month of hourly demand whose temperature and activity cycles share a
/// daily rhythm, so that hour of day confounds the temperature effect.
///
/// temperature = temp_mean + temp_swing·cos(2π(h − temp_peak_hour)/24) + N(0, temp_noise_sd)
/// demand = base + temp_effect·|temperature − temp_mid| + activity_amp·cos(2π(h − activity_peak_hour)/24) + N(0, noise_sd)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedMonth {
    pub year: i32,
    pub month: u32,
    pub temp_effect: f64,
    pub temp_mid: f64,
    pub temp_mean: f64,
    pub temp_swing: f64,
    pub temp_peak_hour: f64,
    pub temp_noise_sd: f64,
    pub activity_amp: f64,
    pub activity_peak_hour: f64,
    pub base: f64,
    pub noise_sd: f64,
}

impl Default for ConfoundedMonth {
    fn default() -> Self {
        Self {
            year: 2024,
            month: 7,
            temp_effect: 25.0,
            temp_mid: 56.0,
            temp_mean: 80.0,
            temp_swing: 10.0,
            temp_peak_hour: 15.0,
            temp_noise_sd: 4.0,
            activity_amp: 300.0,
            activity_peak_hour: 18.0,
            base: 3000.0,
            noise_sd: 50.0,
        }
    }
}

impl ConfoundedMonth {
    /// Same month with temperature independent of hour: the daily swing is
    /// folded into the noise so the spread of temperature is comparable.
    pub fn unconfounded(&self) -> Self {
        Self {
            temp_swing: 0.0,
            temp_noise_sd: (self.temp_noise_sd.powi(2) + 0.5 * self.temp_swing.powi(2)).sqrt(),
            ..self.clone()
        }
    }

    pub fn generate(&self, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let start = Utc
            .with_ymd_and_hms(self.year, self.month, 1, 0, 0, 0)
            .single()
            .expect("valid month start");
        let (ny, nm) = if self.month == 12 { (self.year + 1, 1) } else { (self.year, self.month + 1) };
        let end = Utc.with_ymd_and_hms(ny, nm, 1, 0, 0, 0).single().expect("valid month end");
        let hours = (end - start).num_hours();
        let tz = TzRule::utc();
        let cycle = |h: f64, peak: f64| (2.0 * PI * (h - peak) / 24.0).cos();
        let records = (0..hours)
            .map(|i| {
                let ts = start + Duration::hours(i);
                let calendar = tz.calendar(ts);
                let h = calendar.hour() as f64;
                let temperature = self.temp_mean
                    + self.temp_swing * cycle(h, self.temp_peak_hour)
                    + self.temp_noise_sd * rng.sample::<f64, _>(StandardNormal);
                let demand = self.base
                    + self.temp_effect * (temperature - self.temp_mid).abs()
                    + self.activity_amp * cycle(h, self.activity_peak_hour)
                    + self.noise_sd * rng.sample::<f64, _>(StandardNormal);
                HourlyRecord {
                    timestamp: ts,
                    calendar,
                    weather: WeatherObservation {
                        temperature,
                        humidity: 0.5,
                        wind_speed: 10.0,
                        radiation: 0.0,
                    },
                    demand,
                }
            })
            .collect();
        Dataset::new(records).expect("hourly timestamps increase")
    }
}
