use crate::data::{Dataset, HourlyRecord, WeatherObservation};
use crate::grad::{
    scalar::{beta_ln_pdf, normal_ln_pdf, rectified_normal_ln_pdf},
    GradError, Scalar, Tape,
};
use crate::scm::equations::{self, CalendarFeatures};
use crate::scm::{Coefficients, FixedSettings, ScmParams};

/// Humidity is clamped into the open interval before the Beta density.
pub const HUMIDITY_EPS: f64 = 1e-4;

/// A record with its calendar features computed once.
#[derive(Debug, Clone)]
pub struct PreparedRecord {
    pub features: CalendarFeatures,
    pub weather: WeatherObservation,
    pub demand: f64,
}

impl PreparedRecord {
    pub fn new(r: &HourlyRecord, fixed: &FixedSettings) -> Self {
        Self {
            features: CalendarFeatures::new(r.calendar, fixed),
            weather: r.weather,
            demand: r.demand,
        }
    }
}

pub fn prepare(ds: &Dataset, fixed: &FixedSettings) -> Vec<PreparedRecord> {
    ds.iter().map(|r| PreparedRecord::new(r, fixed)).collect()
}

/// Joint log-density of one record's weather and demand given the
/// coefficients. Observed radiation feeds the temperature mean, observed
/// weather feeds the demand mean.
pub fn record_log_likelihood<S: Scalar>(r: &PreparedRecord, c: &Coefficients<S>, fixed: &FixedSettings) -> S {
    let f = &r.features;
    let w = &r.weather;
    let temp = normal_ln_pdf(w.temperature, equations::temp_mean(f, w.radiation, c), c.temp_noise_sd);
    let (alpha, beta) = equations::humidity_shapes(f, c);
    let rh = w.humidity.clamp(HUMIDITY_EPS, 1.0 - HUMIDITY_EPS);
    let humid = beta_ln_pdf(rh, alpha, beta);
    let rad = rectified_normal_ln_pdf(w.radiation, equations::radiation_mean(f, c), c.rad_noise_sd);
    let wind = rectified_normal_ln_pdf(w.wind_speed, c.wind_mean, c.wind_sd);
    let demand = normal_ln_pdf(r.demand, equations::demand_mean(f, w, c, fixed), c.demand_noise_sd);
    temp + humid + rad + wind + demand
}

/// Log-likelihood of a whole dataset at a fixed parameter set.
pub fn log_likelihood(ds: &Dataset, params: &ScmParams) -> f64 {
    ds.iter()
        .map(|r| record_log_likelihood(&PreparedRecord::new(r, &params.fixed), &params.coef, &params.fixed))
        .sum()
}

/// Records differentiated together on one auxiliary tape.
pub const CHUNK: usize = 512;

/// Value and gradient (w.r.t. the flat natural-space coefficients) of the
/// summed log-likelihood of `records`. Each chunk is differentiated on its
/// own tape so the caller's tape only sees one node per chunk.
pub fn log_likelihood_grad(
    records: &[&PreparedRecord],
    theta: &[f64],
    order: usize,
    fixed: &FixedSettings,
) -> Result<(f64, Vec<f64>), GradError> {
    let mut value = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for chunk in records.chunks(CHUNK) {
        let tape = Tape::with_capacity(chunk.len() * 96 + theta.len());
        let leaves = tape.leaves(theta);
        let c = Coefficients::from_slice(order, &leaves).expect("theta has the coefficient length");
        let terms: Vec<_> = chunk.iter().map(|r| record_log_likelihood(r, &c, fixed)).collect();
        let total = tape.sum(&terms);
        let g = tape.backward(total)?;
        value += total.value();
        for (acc, l) in grad.iter_mut().zip(&leaves) {
            *acc += g.wrt(*l);
        }
    }
    Ok((value, grad))
}
