//! Structural equations, generic over the numeric type of the coefficients.
//!
//! Observed quantities (calendar, weather) always enter as `f64`, so
//! indicator functions of the data never touch the tape.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Coefficients, FixedSettings};
use crate::data::{CalendarPoint, WeatherObservation};
use crate::grad::Scalar;

/// Lower bound on Beta shape parameters.
pub const SHAPE_FLOOR: f64 = 0.01;
/// Sharpness of the softplus used to keep shapes above [`SHAPE_FLOOR`].
pub const SHAPE_SHARPNESS: f64 = 20.0;

/// Calendar-only quantities shared by every equation evaluated at one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct CalendarFeatures {
    pub calendar: CalendarPoint,
    /// `[sin, cos](2πjM/12)` for `j = 1..=n`
    pub month: Vec<[f64; 2]>,
    /// `[sin, cos](2πjH/24)` for `j = 1..=n`
    pub hour: Vec<[f64; 2]>,
    /// `[sin, cos](πH/12)`
    pub humid_hour: [f64; 2],
    /// `[sin, cos](πM/6)`
    pub humid_month: [f64; 2],
    /// `sin(πM/12)`
    pub rad_season: f64,
    /// daylight sine profile, 0 outside sunrise..sunset
    pub rad_shape: f64,
    pub active: bool,
}

impl CalendarFeatures {
    pub fn new(cal: CalendarPoint, fixed: &FixedSettings) -> Self {
        let h = cal.hour() as f64;
        let m = cal.month() as f64;
        let harmonics = |x: f64, period: f64| {
            (1..=fixed.harmonic_order)
                .map(|j| {
                    let a = 2.0 * PI * j as f64 * x / period;
                    [a.sin(), a.cos()]
                })
                .collect::<Vec<_>>()
        };
        let rise = fixed.solar_table.sunrise(cal.month());
        let set = fixed.solar_table.sunset(cal.month());
        let rad_shape = if rise <= h && h <= set {
            (PI * (h - rise) / (set - rise)).sin()
        } else {
            0.0
        };
        Self {
            calendar: cal,
            month: harmonics(m, 12.0),
            hour: harmonics(h, 24.0),
            humid_hour: [(PI * h / 12.0).sin(), (PI * h / 12.0).cos()],
            humid_month: [(PI * m / 6.0).sin(), (PI * m / 6.0).cos()],
            rad_season: (PI * m / 12.0).sin(),
            rad_shape,
            active: fixed.is_active(cal.hour()),
        }
    }
}

fn push_series<S: Scalar>(terms: &mut Vec<(S, f64)>, coef: &[[S; 2]], basis: &[[f64; 2]]) {
    for (c, b) in coef.iter().zip(basis) {
        terms.push((c[0], b[0]));
        terms.push((c[1], b[1]));
    }
}

fn series<S: Scalar>(coef: &[[S; 2]], basis: &[[f64; 2]]) -> S {
    let mut terms = Vec::with_capacity(2 * coef.len());
    push_series(&mut terms, coef, basis);
    S::affine(&terms, 0.0)
}

pub fn temp_mean<S: Scalar>(f: &CalendarFeatures, rad: f64, c: &Coefficients<S>) -> S {
    let mut terms = Vec::with_capacity(4 * f.month.len() + 2);
    push_series(&mut terms, &c.temp_month_harmonics, &f.month);
    push_series(&mut terms, &c.temp_hour_harmonics, &f.hour);
    terms.push((c.rad_to_temp, rad));
    terms.push((c.temp_base, 1.0));
    S::affine(&terms, 0.0)
}

/// Smooth map onto `(SHAPE_FLOOR, ∞)` that is the identity (to within
/// `e^{-20(x-floor)}`) well above the floor.
pub fn floor_softplus<S: Scalar>(x: S) -> S {
    ((x - SHAPE_FLOOR) * SHAPE_SHARPNESS).softplus() / SHAPE_SHARPNESS + SHAPE_FLOOR
}

pub fn humidity_shapes<S: Scalar>(f: &CalendarFeatures, c: &Coefficients<S>) -> (S, S) {
    let a_raw = S::affine(
        &[
            (c.humid_hour[0], f.humid_hour[0]),
            (c.humid_hour[1], f.humid_hour[1]),
            (c.humid_offsets[0], 1.0),
        ],
        0.0,
    );
    let b_raw = S::affine(
        &[
            (c.humid_month[0], f.humid_month[0]),
            (c.humid_month[1], f.humid_month[1]),
            (c.humid_offsets[1], 1.0),
            (a_raw, -1.0),
        ],
        0.0,
    );
    (floor_softplus(a_raw), floor_softplus(b_raw))
}

pub fn radiation_mean<S: Scalar>(f: &CalendarFeatures, c: &Coefficients<S>) -> S {
    S::affine(&[(c.rad_amp[0], f.rad_season * f.rad_shape), (c.rad_amp[1], f.rad_shape)], 0.0)
}

/// Additive demand terms, MW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandBreakdown<S> {
    pub e_base: S,
    pub e_humid: S,
    pub e_wind: S,
    pub e_light: S,
    pub e_daily: S,
    pub e_yearly: S,
    pub total: S,
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn demand_components<S: Scalar>(
    f: &CalendarFeatures,
    w: &WeatherObservation,
    c: &Coefficients<S>,
    fixed: &FixedSettings,
) -> DemandBreakdown<S> {
    let t = w.temperature;
    let e_base = S::affine(&[(c.hvac_slope, (t - fixed.temp_mid).abs()), (c.demand_base, 1.0)], 0.0);
    let e_humid = c.humid_coeff * (w.humidity * indicator(t > fixed.humid_temp_threshold));
    let cold = w.wind_speed * indicator(t < fixed.wind_cold_threshold);
    let hot = w.wind_speed * indicator(t > fixed.wind_hot_threshold);
    let e_wind = c.wind_coeff * cold - c.wind_asymmetry * c.wind_coeff * hot;
    let e_light = c.light_coeff * (c.light_decay * -w.radiation).exp() * indicator(f.active);
    let e_daily = series(&c.daily_harmonics, &f.hour);
    let e_yearly = series(&c.yearly_harmonics, &f.month);
    let total = e_base + e_humid + e_wind + e_light + e_daily + e_yearly;
    DemandBreakdown {
        e_base,
        e_humid,
        e_wind,
        e_light,
        e_daily,
        e_yearly,
        total,
    }
}

/// Same value as `demand_components(..).total` up to rounding, built with
/// fewer operations; used inside the likelihood.
pub fn demand_mean<S: Scalar>(
    f: &CalendarFeatures,
    w: &WeatherObservation,
    c: &Coefficients<S>,
    fixed: &FixedSettings,
) -> S {
    let t = w.temperature;
    let mut terms = Vec::with_capacity(4 * f.hour.len() + 5);
    terms.push((c.hvac_slope, (t - fixed.temp_mid).abs()));
    terms.push((c.demand_base, 1.0));
    let humid = w.humidity * indicator(t > fixed.humid_temp_threshold);
    if humid != 0.0 {
        terms.push((c.humid_coeff, humid));
    }
    if t < fixed.wind_cold_threshold && w.wind_speed != 0.0 {
        terms.push((c.wind_coeff, w.wind_speed));
    }
    push_series(&mut terms, &c.daily_harmonics, &f.hour);
    push_series(&mut terms, &c.yearly_harmonics, &f.month);
    let mut total = S::affine(&terms, 0.0);
    if t > fixed.wind_hot_threshold && w.wind_speed != 0.0 {
        total = total - c.wind_asymmetry * c.wind_coeff * w.wind_speed;
    }
    if f.active {
        total = total + c.light_coeff * (c.light_decay * -w.radiation).exp();
    }
    total
}
