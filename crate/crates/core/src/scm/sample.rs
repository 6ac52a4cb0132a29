use chrono::{DateTime, TimeDelta, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, Normal};

use super::equations::{self, CalendarFeatures};
use super::ScmParams;
use crate::data::{CalendarPoint, Dataset, HourlyRecord, TzRule, WeatherObservation};

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(mean, sd).expect("finite normal parameters").sample(rng)
    } else {
        mean
    }
}

/// One ancestral draw: radiation, then temperature, humidity, wind and
/// finally demand.
pub fn sample_weather_and_demand<R: Rng + ?Sized>(
    cal: CalendarPoint,
    params: &ScmParams,
    rng: &mut R,
) -> (WeatherObservation, f64) {
    let c = &params.coef;
    let f = CalendarFeatures::new(cal, &params.fixed);
    let radiation = normal(rng, equations::radiation_mean(&f, c), c.rad_noise_sd).max(0.0);
    let temperature = normal(rng, equations::temp_mean(&f, radiation, c), c.temp_noise_sd);
    let (alpha, beta) = equations::humidity_shapes(&f, c);
    let humidity = Beta::new(alpha, beta)
        .expect("shapes are floored above zero")
        .sample(rng)
        .clamp(0.0, 1.0);
    let wind_speed = normal(rng, c.wind_mean, c.wind_sd).max(0.0);
    let weather = WeatherObservation {
        temperature,
        humidity,
        wind_speed,
        radiation,
    };
    let mean = equations::demand_components(&f, &weather, c, &params.fixed).total;
    (weather, normal(rng, mean, c.demand_noise_sd))
}

pub fn sample_record<R: Rng + ?Sized>(
    timestamp: DateTime<Utc>,
    cal: CalendarPoint,
    params: &ScmParams,
    rng: &mut R,
) -> HourlyRecord {
    let (weather, demand) = sample_weather_and_demand(cal, params, rng);
    HourlyRecord {
        timestamp,
        calendar: cal,
        weather,
        demand,
    }
}

/// `hours` consecutive hourly records starting at `start`, reproducible
/// from `seed`. Demand draws at or below zero are floored at 1 MW so the
/// output is always a valid dataset.
pub fn simulate(start: DateTime<Utc>, hours: usize, tz: &TzRule, params: &ScmParams, seed: u64) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let records = (0..hours)
        .map(|i| {
            let ts = start + TimeDelta::hours(i as i64);
            let mut r = sample_record(ts, tz.calendar(ts), params, &mut rng);
            r.demand = r.demand.max(1.0);
            r
        })
        .collect();
    Dataset::new(records).expect("consecutive hours are increasing")
}
