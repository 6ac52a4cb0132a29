//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string; the plain Rust functions underneath
//! carry the logic and are what the native tests exercise.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use gridcause::analysis::synthetic::ConfoundedMonth;
use gridcause::analysis::{compare_approaches, CorrelationDensity, TemperatureDesign};
use gridcause::data::{CalendarPoint, WeatherObservation};
use gridcause::scm::{demand_components, ScmParams};

#[derive(Debug, Clone, Serialize)]
pub struct HourDemand {
    pub hour: u32,
    pub total: f64,
    pub base: f64,
    pub humid: f64,
    pub wind: f64,
    pub light: f64,
    pub daily: f64,
    pub yearly: f64,
}

/// Expected demand for each local hour of a day in `month` under fixed
/// weather, at the prior-mean coefficients.
pub fn demand_profile(month: u32, weather: WeatherObservation) -> Result<Vec<HourDemand>, String> {
    weather.validate().map_err(|e| e.to_string())?;
    let params = ScmParams::prior_means();
    (0..24)
        .map(|hour| {
            let cal = CalendarPoint::new(hour, month).map_err(|e| e.to_string())?;
            let b = demand_components(cal, &weather, &params);
            Ok(HourDemand {
                hour,
                total: b.total,
                base: b.e_base,
                humid: b.e_humid,
                wind: b.e_wind,
                light: b.e_light,
                daily: b.e_daily,
                yearly: b.e_yearly,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityCurve {
    pub rho: Vec<f64>,
    pub density: Vec<f64>,
    pub mode: f64,
    pub interval_95: (f64, f64),
}

/// Posterior-style density of the population correlation given a sample
/// correlation `r` over `n` pairs, tabulated on `points` values spanning
/// five standard errors either side in z-space.
pub fn correlation_curve(r: f64, n: usize, points: usize) -> Result<DensityCurve, String> {
    let d = CorrelationDensity::new(r, n).map_err(|e| e.to_string())?;
    let points = points.max(3);
    let centre = r.atanh();
    let half = 5.0 / ((n - 3) as f64).sqrt();
    let rho: Vec<f64> = (0..points)
        .map(|i| (centre - half + 2.0 * half * i as f64 / (points - 1) as f64).tanh())
        .collect();
    let density = rho.iter().map(|&p| d.density(p)).collect();
    Ok(DensityCurve {
        rho,
        density,
        mode: d.mode(),
        interval_95: d.interval(0.95),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfoundingResult {
    pub true_effect: f64,
    /// temperature alone
    pub approach1: f64,
    /// temperature with hour-of-day controls
    pub approach2: f64,
    pub mape_approach1: f64,
    pub mape_approach2: f64,
}

/// Simulates a month where the hour of day drives both temperature and
/// demand, then fits the temperature slope with and without hour controls.
/// `activity_amp` is the size of the hour-driven demand swing in MW.
pub fn confounding(activity_amp: f64, seed: u64) -> Result<ConfoundingResult, String> {
    if !activity_amp.is_finite() || activity_amp < 0.0 {
        return Err(format!("activity amplitude must be a non-negative number, got {activity_amp}"));
    }
    let gen = ConfoundedMonth {
        activity_amp,
        ..ConfoundedMonth::default()
    };
    let train = gen.generate(seed);
    let test = ConfoundedMonth {
        year: gen.year + 1,
        ..gen.clone()
    }
    .generate(seed.wrapping_add(1));
    let cmp = compare_approaches(&TemperatureDesign::default(), &train, Some(&test)).map_err(|e| e.to_string())?;
    let m = &cmp.months[0];
    Ok(ConfoundingResult {
        true_effect: gen.temp_effect,
        approach1: m.coef_approach1,
        approach2: m.coef_approach2,
        mape_approach1: m.mape_approach1.unwrap_or(f64::NAN),
        mape_approach2: m.mape_approach2.unwrap_or(f64::NAN),
    })
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = demandProfile)]
pub fn demand_profile_js(
    month: u32,
    temperature: f64,
    humidity: f64,
    wind_speed: f64,
    radiation: f64,
) -> Result<String, JsError> {
    to_js(demand_profile(
        month,
        WeatherObservation {
            temperature,
            humidity,
            wind_speed,
            radiation,
        },
    ))
}

#[wasm_bindgen(js_name = correlationDensity)]
pub fn correlation_density_js(r: f64, n: usize, points: usize) -> Result<String, JsError> {
    to_js(correlation_curve(r, n, points))
}

#[wasm_bindgen(js_name = confoundingDemo)]
pub fn confounding_demo_js(activity_amp: f64, seed: u64) -> Result<String, JsError> {
    to_js(confounding(activity_amp, seed))
}
