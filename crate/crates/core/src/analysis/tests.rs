use super::synthetic::ConfoundedMonth;
use super::*;
use crate::data::{Dataset, TzRule};
use crate::eval::mape;
use crate::scm::{simulate, ScmParams};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;

fn simulated(params: &ScmParams, hours: usize, seed: u64) -> Dataset {
    let start = Utc.with_ymd_and_hms(2023, 1, 1, 6, 0, 0).unwrap();
    simulate(start, hours, &TzRule::us_central(), params, seed)
}

/// Prior means with every demand term other than humidity switched off or
/// constant inside a single-hour stratum.
fn humidity_only(humid_coeff: f64) -> ScmParams {
    let mut p = ScmParams::prior_means();
    p.coef.humid_coeff = humid_coeff;
    p.coef.hvac_slope = 0.0;
    p.coef.wind_coeff = 0.0;
    p.coef.light_coeff = 0.0;
    p.coef.yearly_harmonics = vec![[0.0, 0.0]; 2];
    p.coef.demand_noise_sd = 20.0;
    p
}

#[test]
fn humidity_effect_recovered_in_stratum() {
    let ds = simulated(&humidity_only(500.0), 2 * 8760, 1);
    let e = conditional_humidity_effect(&ds, 70.0, &[15], &[]).unwrap();
    assert!((e.slope - 500.0).abs() < 50.0, "{} ± {}", e.slope, e.slope_se);
    assert!(e.demand_sd > 0.0);
}

#[test]
fn absent_humidity_effect_is_null() {
    let ds = simulated(&humidity_only(0.0), 2 * 8760, 2);
    let e = conditional_humidity_effect(&ds, 70.0, &[15], &[]).unwrap();
    assert!(e.slope.abs() < 2.0 * e.slope_se, "{} ± {}", e.slope, e.slope_se);
}

#[test]
fn thin_stratum_reports_count() {
    let ds = simulated(&ScmParams::prior_means(), 200, 3);
    match conditional_humidity_effect(&ds, 200.0, &[], &[]) {
        Err(AnalysisError::ThinStratum { got, needed, .. }) => {
            assert_eq!(got, 0);
            assert_eq!(needed, MIN_STRATUM);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn approach1_biased_approach2_not_under_confounding() {
    let gen = ConfoundedMonth::default();
    let ds = gen.generate(11);
    let a1 = fit_approach1(&ds, gen.month).unwrap();
    let a2 = fit_approach2(&ds, gen.month).unwrap();
    let c1 = a1.stage1.coef(TEMP_COLUMN).unwrap();
    let c2 = a2.coef(TEMP_COLUMN).unwrap();
    assert!((c1 - 25.0).abs() / 25.0 >= 0.2, "approach 1 {c1}");
    assert!((c2 - 25.0).abs() / 25.0 <= 0.05, "approach 2 {c2}");
}

#[test]
fn approach1_unbiased_without_confounding() {
    let gen = ConfoundedMonth::default().unconfounded();
    let ds = gen.generate(12);
    let s1 = fit_approach1(&ds, gen.month).unwrap().stage1;
    let c = s1.coef(TEMP_COLUMN).unwrap();
    assert!((c - 25.0).abs() < 2.0 * s1.se(TEMP_COLUMN).unwrap(), "{c}");
}

#[test]
fn approach1_worse_out_of_sample() {
    let gen = ConfoundedMonth::default();
    let train = gen.generate(21);
    let test = ConfoundedMonth { year: 2025, ..gen.clone() }.generate(22);
    let design = TemperatureDesign::default();
    let cmp = compare_approaches(&design, &train, Some(&test)).unwrap();
    assert_eq!(cmp.months.len(), 1);
    let m = &cmp.months[0];
    assert!(m.mape_approach1.unwrap() > m.mape_approach2.unwrap());
    assert!(cmp.mean_deviation > 0.2);
    assert_eq!(cmp.mean_deviation, cmp.weighted_deviation);

    // predictions agree with an independent evaluation of the fitted rows
    let a2 = design.approach2(&train).unwrap();
    let rows = design.joint_design(&test);
    let manual: Vec<f64> = a2.fitted(&rows);
    let direct: Vec<f64> = test.iter().map(|r| design.predict_approach2(&a2, r)).collect();
    for (a, b) in manual.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!((mape(&direct, &test.demand()).unwrap() - m.mape_approach2.unwrap()).abs() < 1e-12);
}

#[test]
fn fwl_matches_joint_regression() {
    for seed in 0..10 {
        let gen = ConfoundedMonth {
            month: 1 + (seed as u32 % 12),
            temp_mean: 40.0 + 5.0 * seed as f64,
            ..ConfoundedMonth::default()
        };
        let ds = gen.generate(seed);
        let joint = fit_approach2(&ds, gen.month).unwrap().coef(TEMP_COLUMN).unwrap();
        let partial = fwl_fit(&ds, gen.month).unwrap().coef(TEMP_COLUMN).unwrap();
        assert!((joint - partial).abs() < 1e-8, "seed {seed}: {joint} vs {partial}");
    }
}

#[test]
fn fwl_without_harmonics_is_plain_slope() {
    let ds = ConfoundedMonth::default().generate(4);
    let design = TemperatureDesign {
        harmonic_order: 0,
        ..TemperatureDesign::default()
    };
    let plain = design.approach1(&ds).unwrap().stage1.coef(TEMP_COLUMN).unwrap();
    let partial = design.fwl(&ds).unwrap().coef(TEMP_COLUMN).unwrap();
    assert!((plain - partial).abs() < 1e-9);
}

#[test]
fn month_outside_range_or_absent() {
    let ds = ConfoundedMonth::default().generate(1);
    assert!(fit_approach2(&ds, 13).is_err());
    assert!(fit_approach2(&ds, 3).is_err());
}

#[test]
fn grid_search_recovers_generating_threshold() {
    let ds = simulated(&ScmParams::prior_means(), 8760, 5);
    let grid: Vec<f64> = (0..6).map(|i| 60.0 + 5.0 * i as f64).collect();
    let (best, scores) = grid_search_threshold(&ds, &grid).unwrap();
    assert_eq!(best, 70.0);
    assert_eq!(scores.len(), grid.len());
    assert_eq!(grid_search_threshold(&ds, &[65.0]).unwrap().0, 65.0);
    assert!(grid_search_threshold(&ds, &[]).is_err());
}

#[test]
fn grid_search_ties_go_low() {
    // every record is hotter than both candidates, so the scores coincide
    let ds = ConfoundedMonth::default().generate(2);
    let ds = ds.filter(|r| r.weather.temperature > 50.0);
    let mut recs: Vec<_> = ds.records().to_vec();
    for (i, r) in recs.iter_mut().enumerate() {
        r.weather.humidity = 0.3 + 0.001 * (i % 100) as f64;
    }
    let ds = Dataset::new(recs).unwrap();
    assert_eq!(grid_search_threshold(&ds, &[45.0, 40.0]).unwrap().0, 40.0);
}

#[test]
fn seasonal_variance_of_constant_demand_is_zero() {
    let ds = simulated(&ScmParams::prior_means(), 24 * 62, 1);
    let mut recs = ds.records().to_vec();
    for r in &mut recs {
        r.demand = 3000.0;
    }
    let t = seasonal_variance(&Dataset::new(recs).unwrap()).unwrap();
    assert!(t.values().all(|m| m.variance == 0.0));
    assert_eq!(t.len(), 3);
}

#[test]
fn seasonal_variance_rejects_thin_month() {
    let ds = simulated(&ScmParams::prior_means(), 24 * 31 + 10, 1);
    assert!(matches!(seasonal_variance(&ds), Err(AnalysisError::ThinStratum { got: 10, .. })));
}

#[test]
fn summer_variance_exceeds_winter() {
    let ds = simulated(&ScmParams::prior_means(), 8760, 6);
    let t = seasonal_variance(&ds).unwrap();
    assert!(summer_winter_ratio(&t).unwrap() > 1.0);
    // oracle: direct two-pass variance of one month
    let jan: Vec<f64> = ds.month(1).demand();
    let mean = jan.iter().sum::<f64>() / jan.len() as f64;
    let var = jan.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (jan.len() - 1) as f64;
    assert!((t[&1].variance - var).abs() < 1e-9 * var);
}

#[test]
fn regimes_skip_thin_strata() {
    let ds = simulated(&ScmParams::prior_means(), 8760, 7);
    let (fitted, skipped) = regime_effects(&ds, &wind_regimes(), Regressor::WindSpeed);
    assert_eq!(fitted.len() + skipped.len(), 2);
    let (fitted, _) = regime_effects(&ds, &radiation_regimes(), Regressor::Radiation);
    assert!(!fitted.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn approach2_invariant_to_shifted_harmonics(shift in -5.0f64..5.0, seed in 0u64..1000) {
        let ds = ConfoundedMonth::default().generate(seed);
        let design = TemperatureDesign::default();
        let base = design.approach2(&ds).unwrap().coef(TEMP_COLUMN).unwrap();
        let mut d = design.joint_design(&ds);
        for (name, col) in d.names.iter().zip(d.columns.iter_mut()) {
            if name.starts_with("hour_") {
                col.iter_mut().for_each(|v| *v += shift);
            }
        }
        let shifted = solve_ols(&d, &ds.demand()).unwrap().coef(TEMP_COLUMN).unwrap();
        prop_assert!((base - shifted).abs() < 1e-8);
    }

    #[test]
    fn grid_search_returns_a_grid_member(grid in prop::collection::vec(40.0f64..95.0, 1..6)) {
        let ds = ConfoundedMonth::default().generate(3);
        let mut recs = ds.records().to_vec();
        for (i, r) in recs.iter_mut().enumerate() {
            r.weather.humidity = 0.2 + 0.6 * ((i * 37 % 101) as f64 / 101.0);
        }
        let ds = Dataset::new(recs).unwrap();
        if let Ok((best, _)) = grid_search_threshold(&ds, &grid) {
            prop_assert!(grid.contains(&best));
        }
    }

    #[test]
    fn residuals_centred_with_intercept(seed in 0u64..1000) {
        let ds = ConfoundedMonth::default().generate(seed);
        let fit = TemperatureDesign::default().approach2(&ds).unwrap();
        let mean = fit.residuals.iter().sum::<f64>() / fit.n as f64;
        prop_assert!(mean.abs() < 1e-9);
    }
}
