use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::correlation::pearson;
use super::ols::{solve_ols, Design, RegressionFit};
use super::AnalysisError;
use crate::data::{Dataset, HourlyRecord};
use crate::eval::mape;

/// Smallest stratum or month the diagnostics will summarise.
pub const MIN_STRATUM: usize = 30;

/// Temperature regressions: demand against the V-shaped distance from a
/// comfort midpoint, with or without hour-of-day harmonics as controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureDesign {
    pub temp_mid: f64,
    pub harmonic_order: usize,
}

impl Default for TemperatureDesign {
    fn default() -> Self {
        Self {
            temp_mid: 56.0,
            harmonic_order: 2,
        }
    }
}

pub const TEMP_COLUMN: &str = "temp_distance";

pub fn hour_harmonic_names(order: usize) -> Vec<String> {
    (1..=order)
        .flat_map(|k| [format!("hour_sin_{k}"), format!("hour_cos_{k}")])
        .collect()
}

pub fn hour_harmonics(hour: u32, order: usize) -> Vec<f64> {
    let angle = 2.0 * PI * hour as f64 / 24.0;
    (1..=order)
        .flat_map(|k| {
            let x = k as f64 * angle;
            [x.sin(), x.cos()]
        })
        .collect()
}

/// Fitted Approach 1: the temperature stage, then the hour stage on its
/// residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageFit {
    pub stage1: RegressionFit,
    pub stage2: RegressionFit,
}

impl TemperatureDesign {
    fn distance(&self, r: &HourlyRecord) -> f64 {
        (r.weather.temperature - self.temp_mid).abs()
    }

    fn harmonic_columns(&self, ds: &Dataset, design: Design) -> Design {
        let rows: Vec<Vec<f64>> = ds
            .iter()
            .map(|r| hour_harmonics(r.calendar.hour(), self.harmonic_order))
            .collect();
        hour_harmonic_names(self.harmonic_order)
            .into_iter()
            .enumerate()
            .fold(design, |d, (j, name)| d.column(name, rows.iter().map(|row| row[j]).collect()))
    }

    fn temperature_design(&self, ds: &Dataset) -> Design {
        Design::with_intercept(ds.len()).column(TEMP_COLUMN, ds.iter().map(|r| self.distance(r)).collect())
    }

    fn control_design(&self, ds: &Dataset) -> Design {
        self.harmonic_columns(ds, Design::with_intercept(ds.len()))
    }

    pub fn joint_design(&self, ds: &Dataset) -> Design {
        self.harmonic_columns(ds, self.temperature_design(ds))
    }

    pub fn approach1(&self, ds: &Dataset) -> Result<TwoStageFit, AnalysisError> {
        let stage1 = solve_ols(&self.temperature_design(ds), &ds.demand())?;
        let stage2 = solve_ols(&self.control_design(ds), &stage1.residuals)?;
        Ok(TwoStageFit { stage1, stage2 })
    }

    pub fn approach2(&self, ds: &Dataset) -> Result<RegressionFit, AnalysisError> {
        solve_ols(&self.joint_design(ds), &ds.demand())
    }

    /// Temperature coefficient by partialling the hour harmonics out of
    /// both demand and temperature distance.
    pub fn fwl(&self, ds: &Dataset) -> Result<RegressionFit, AnalysisError> {
        let focus = Design::new().column(TEMP_COLUMN, ds.iter().map(|r| self.distance(r)).collect());
        fwl(&self.control_design(ds), &focus, &ds.demand())
    }

    pub fn predict_approach1(&self, fit: &TwoStageFit, r: &HourlyRecord) -> f64 {
        let temp = fit.stage1.predict_row(&[1.0, self.distance(r)]);
        let mut row = vec![1.0];
        row.extend(hour_harmonics(r.calendar.hour(), self.harmonic_order));
        temp + fit.stage2.predict_row(&row)
    }

    pub fn predict_approach2(&self, fit: &RegressionFit, r: &HourlyRecord) -> f64 {
        let mut row = vec![1.0, self.distance(r)];
        row.extend(hour_harmonics(r.calendar.hour(), self.harmonic_order));
        fit.predict_row(&row)
    }
}

fn month_slice(ds: &Dataset, month: u32) -> Result<Dataset, AnalysisError> {
    if !(1..=12).contains(&month) {
        return Err(AnalysisError::Shape(format!("month {month} outside 1..=12")));
    }
    let slice = ds.month(month);
    if slice.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, got: 0 });
    }
    Ok(slice)
}

pub fn fit_approach1(ds: &Dataset, month: u32) -> Result<TwoStageFit, AnalysisError> {
    TemperatureDesign::default().approach1(&month_slice(ds, month)?)
}

pub fn fit_approach2(ds: &Dataset, month: u32) -> Result<RegressionFit, AnalysisError> {
    TemperatureDesign::default().approach2(&month_slice(ds, month)?)
}

pub fn fwl_fit(ds: &Dataset, month: u32) -> Result<RegressionFit, AnalysisError> {
    TemperatureDesign::default().fwl(&month_slice(ds, month)?)
}

fn residualize(controls: &Design, y: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if controls.cols() == 0 {
        return Ok(y.to_vec());
    }
    Ok(solve_ols(controls, y)?.residuals)
}

/// Frisch–Waugh–Lovell: regress the control-residualised target on the
/// control-residualised focus columns (no intercept; the residuals are
/// already centred when the controls carry one). Standard errors use
/// `n − focus columns` degrees of freedom.
pub fn fwl(controls: &Design, focus: &Design, y: &[f64]) -> Result<RegressionFit, AnalysisError> {
    let mut partialled = Design::new();
    for (name, col) in focus.names.iter().zip(&focus.columns) {
        partialled = partialled.column(name.clone(), residualize(controls, col)?);
    }
    solve_ols(&partialled, &residualize(controls, y)?)
}

/// Per-month comparison of the two temperature approaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthComparison {
    pub month: u32,
    pub train_n: usize,
    pub coef_approach1: f64,
    pub coef_approach2: f64,
    /// |coef₁ − coef₂| / |coef₂|
    pub deviation: f64,
    /// held-out MAPE, present when the test slice has this month
    pub mape_approach1: Option<f64>,
    pub mape_approach2: Option<f64>,
}

impl MonthComparison {
    /// (MAPE₁ − MAPE₂) / MAPE₂
    pub fn mape_gap(&self) -> Option<f64> {
        Some((self.mape_approach1? - self.mape_approach2?) / self.mape_approach2?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachComparison {
    pub months: Vec<MonthComparison>,
    pub mean_deviation: f64,
    pub weighted_deviation: f64,
    pub mean_mape_gap: Option<f64>,
    pub weighted_mape_gap: Option<f64>,
}

/// Fits both approaches month by month on `train` and scores them on the
/// same months of `test`. Aggregates are given with equal month weights
/// and with training-size weights.
pub fn compare_approaches(
    design: &TemperatureDesign,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<ApproachComparison, AnalysisError> {
    let mut months = Vec::new();
    for month in 1..=12 {
        let slice = train.month(month);
        if slice.is_empty() {
            continue;
        }
        let a1 = design.approach1(&slice)?;
        let a2 = design.approach2(&slice)?;
        let c1 = a1.stage1.coef(TEMP_COLUMN).expect("column present");
        let c2 = a2.coef(TEMP_COLUMN).expect("column present");
        let (mut m1, mut m2) = (None, None);
        if let Some(test) = test {
            let held = test.month(month);
            if !held.is_empty() {
                let actual = held.demand();
                let p1: Vec<f64> = held.iter().map(|r| design.predict_approach1(&a1, r)).collect();
                let p2: Vec<f64> = held.iter().map(|r| design.predict_approach2(&a2, r)).collect();
                m1 = Some(mape(&p1, &actual).map_err(|e| AnalysisError::Shape(e.to_string()))?);
                m2 = Some(mape(&p2, &actual).map_err(|e| AnalysisError::Shape(e.to_string()))?);
            }
        }
        months.push(MonthComparison {
            month,
            train_n: slice.len(),
            coef_approach1: c1,
            coef_approach2: c2,
            deviation: (c1 - c2).abs() / c2.abs(),
            mape_approach1: m1,
            mape_approach2: m2,
        });
    }
    if months.is_empty() {
        return Err(AnalysisError::TooFew { needed: 1, got: 0 });
    }
    let mean = |vals: &[(f64, f64)]| -> Option<f64> {
        if vals.is_empty() {
            return None;
        }
        let w: f64 = vals.iter().map(|v| v.1).sum();
        Some(vals.iter().map(|v| v.0 * v.1).sum::<f64>() / w)
    };
    let dev_equal: Vec<(f64, f64)> = months.iter().map(|m| (m.deviation, 1.0)).collect();
    let dev_sized: Vec<(f64, f64)> = months.iter().map(|m| (m.deviation, m.train_n as f64)).collect();
    let gaps: Vec<(f64, usize)> = months.iter().filter_map(|m| Some((m.mape_gap()?, m.train_n))).collect();
    let gap_equal: Vec<(f64, f64)> = gaps.iter().map(|g| (g.0, 1.0)).collect();
    let gap_sized: Vec<(f64, f64)> = gaps.iter().map(|g| (g.0, g.1 as f64)).collect();
    Ok(ApproachComparison {
        mean_deviation: mean(&dev_equal).expect("months non-empty"),
        weighted_deviation: mean(&dev_sized).expect("months non-empty"),
        mean_mape_gap: mean(&gap_equal),
        weighted_mape_gap: mean(&gap_sized),
        months,
    })
}

/// Inclusive selection of hours, months and a temperature band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub name: String,
    /// empty = all months
    pub months: Vec<u32>,
    /// empty = all hours
    pub hours: Vec<u32>,
    /// open interval (lo, hi) on temperature in °F
    pub temp_above: Option<f64>,
    pub temp_below: Option<f64>,
}

impl Stratum {
    pub fn all(name: &str) -> Self {
        Self {
            name: name.to_string(),
            months: Vec::new(),
            hours: Vec::new(),
            temp_above: None,
            temp_below: None,
        }
    }

    pub fn months(mut self, months: impl IntoIterator<Item = u32>) -> Self {
        self.months = months.into_iter().collect();
        self
    }

    pub fn hours(mut self, hours: impl IntoIterator<Item = u32>) -> Self {
        self.hours = hours.into_iter().collect();
        self
    }

    pub fn temperature(mut self, above: Option<f64>, below: Option<f64>) -> Self {
        self.temp_above = above;
        self.temp_below = below;
        self
    }

    pub fn contains(&self, r: &HourlyRecord) -> bool {
        let t = r.weather.temperature;
        (self.months.is_empty() || self.months.contains(&r.calendar.month()))
            && (self.hours.is_empty() || self.hours.contains(&r.calendar.hour()))
            && self.temp_above.is_none_or(|lo| t > lo)
            && self.temp_below.is_none_or(|hi| t < hi)
    }

    pub fn select(&self, ds: &Dataset) -> Result<Dataset, AnalysisError> {
        let subset = ds.filter(|r| self.contains(r));
        if subset.len() < MIN_STRATUM {
            return Err(AnalysisError::ThinStratum {
                name: self.name.clone(),
                needed: MIN_STRATUM,
                got: subset.len(),
            });
        }
        Ok(subset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    Temperature,
    Humidity,
    WindSpeed,
    Radiation,
}

impl Regressor {
    pub fn name(self) -> &'static str {
        match self {
            Regressor::Temperature => "temperature",
            Regressor::Humidity => "humidity",
            Regressor::WindSpeed => "wind_speed",
            Regressor::Radiation => "radiation",
        }
    }

    pub fn value(self, r: &HourlyRecord) -> f64 {
        match self {
            Regressor::Temperature => r.weather.temperature,
            Regressor::Humidity => r.weather.humidity,
            Regressor::WindSpeed => r.weather.wind_speed,
            Regressor::Radiation => r.weather.radiation,
        }
    }
}

/// Demand-on-regressor slope inside one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEffect {
    pub stratum: Stratum,
    pub regressor: Regressor,
    pub fit: RegressionFit,
    pub slope: f64,
    pub slope_se: f64,
    pub demand_sd: f64,
}

pub fn stratum_effect(ds: &Dataset, stratum: &Stratum, regressor: Regressor) -> Result<StratumEffect, AnalysisError> {
    let subset = stratum.select(ds)?;
    let x: Vec<f64> = subset.iter().map(|r| regressor.value(r)).collect();
    let demand = subset.demand();
    let fit = solve_ols(&Design::with_intercept(subset.len()).column(regressor.name(), x), &demand)?;
    Ok(StratumEffect {
        stratum: stratum.clone(),
        regressor,
        slope: fit.coef(regressor.name()).expect("column present"),
        slope_se: fit.se(regressor.name()).expect("column present"),
        demand_sd: sample_sd(&demand),
        fit,
    })
}

/// Humidity slope among hot hours inside the given hour and month windows
/// (inclusive, empty for no restriction).
pub fn conditional_humidity_effect(
    ds: &Dataset,
    temp_threshold: f64,
    hour_window: &[u32],
    month_window: &[u32],
) -> Result<StratumEffect, AnalysisError> {
    let stratum = Stratum::all("humidity")
        .months(month_window.iter().copied())
        .hours(hour_window.iter().copied())
        .temperature(Some(temp_threshold), None);
    stratum_effect(ds, &stratum, Regressor::Humidity)
}

/// Regimes in which the radiation–demand slope is read off.
pub fn radiation_regimes() -> Vec<Stratum> {
    vec![
        Stratum::all("early_summer_afternoon").months([6]).hours(12..=16),
        Stratum::all("summer_sunset").months([7]).hours(18..=21),
        Stratum::all("early_winter_afternoon").months([12]).hours(12..=16),
        Stratum::all("winter_sunset").months([12]).hours(15..=18),
    ]
}

/// Temperature bands in which the wind–demand slope is read off.
pub fn wind_regimes() -> Vec<Stratum> {
    vec![
        Stratum::all("hot_80_85").temperature(Some(80.0), Some(85.0)),
        Stratum::all("cold_minus10_minus5").temperature(Some(-10.0), Some(-5.0)),
    ]
}

/// Slopes in every regime that has enough records; thin regimes are listed
/// with their counts instead of failing the whole analysis.
pub fn regime_effects(
    ds: &Dataset,
    regimes: &[Stratum],
    regressor: Regressor,
) -> (Vec<StratumEffect>, Vec<(String, usize)>) {
    let mut fitted = Vec::new();
    let mut skipped = Vec::new();
    for s in regimes {
        match stratum_effect(ds, s, regressor) {
            Ok(e) => fitted.push(e),
            Err(_) => skipped.push((s.name.clone(), ds.iter().filter(|r| s.contains(r)).count())),
        }
    }
    (fitted, skipped)
}

/// Threshold maximising corr(RH·1[T > τ], demand). Ties go to the lowest
/// threshold; candidates whose indicator is constant are skipped.
pub fn grid_search_threshold(ds: &Dataset, grid: &[f64]) -> Result<(f64, Vec<(f64, Option<f64>)>), AnalysisError> {
    if grid.is_empty() {
        return Err(AnalysisError::Shape("empty threshold grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let demand = ds.demand();
    let scores: Vec<(f64, Option<f64>)> = sorted
        .iter()
        .map(|&tau| {
            let x: Vec<f64> = ds
                .iter()
                .map(|r| if r.weather.temperature > tau { r.weather.humidity } else { 0.0 })
                .collect();
            (tau, pearson(&x, &demand).ok())
        })
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &(tau, score) in &scores {
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((tau, s));
            }
        }
    }
    match (best, sorted.len()) {
        (Some((tau, _)), _) => Ok((tau, scores)),
        // a single candidate is returned even when it cannot be scored
        (None, 1) => Ok((sorted[0], scores)),
        (None, _) => Err(AnalysisError::Constant),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthVariance {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Sample variance of demand per calendar month present in the data.
pub fn seasonal_variance(ds: &Dataset) -> Result<BTreeMap<u32, MonthVariance>, AnalysisError> {
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in ds.iter() {
        groups.entry(r.calendar.month()).or_default().push(r.demand);
    }
    let mut table = BTreeMap::new();
    for (month, values) in groups {
        if values.len() < MIN_STRATUM {
            return Err(AnalysisError::ThinStratum {
                name: format!("month {month}"),
                needed: MIN_STRATUM,
                got: values.len(),
            });
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        table.insert(month, MonthVariance { n, mean, variance });
    }
    Ok(table)
}

/// Mean Jun–Aug variance over mean Dec–Feb variance, when both seasons are
/// present.
pub fn summer_winter_ratio(table: &BTreeMap<u32, MonthVariance>) -> Option<f64> {
    let avg = |months: [u32; 3]| {
        let v: Vec<f64> = months.iter().filter_map(|m| table.get(m)).map(|m| m.variance).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Some(avg([6, 7, 8])? / avg([12, 1, 2])?)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
