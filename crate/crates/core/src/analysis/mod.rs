//! Regression diagnostics for confounding: correlation with a Fisher-z
//! confidence density, stratified effects, the two temperature approaches
//! and their Frisch–Waugh–Lovell check, threshold search, a linear backdoor
//! oracle and seasonal variance.

mod backdoor;
mod correlation;
mod ols;
mod regress;
pub mod synthetic;

pub use backdoor::{backdoor_check, BackdoorResult, LinearScmInstance, Sample};
pub use correlation::{correlation_with_density, pearson, CorrelationDensity};
pub use ols::{solve_ols, Design, RegressionFit};
pub use regress::{
    compare_approaches, conditional_humidity_effect, fit_approach1, fit_approach2, fwl, fwl_fit,
    grid_search_threshold, hour_harmonic_names, hour_harmonics, radiation_regimes, regime_effects,
    seasonal_variance, stratum_effect, summer_winter_ratio, wind_regimes, ApproachComparison, MonthComparison,
    MonthVariance, Regressor, Stratum, StratumEffect, TemperatureDesign, TwoStageFit, MIN_STRATUM, TEMP_COLUMN,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("column `{column}` is a linear combination of {collinear_with:?}")]
    RankDeficient { column: String, collinear_with: Vec<String> },
    #[error("{0}")]
    Shape(String),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("stratum `{name}` has {got} records, need at least {needed}")]
    ThinStratum { name: String, needed: usize, got: usize },
    #[error("input has zero variance")]
    Constant,
    #[error("{0}")]
    Boundary(String),
}

#[cfg(test)]
mod tests;
