use super::*;
use crate::data::TzRule;
use crate::scm::{simulate, ScmParams};
use chrono::TimeZone;
use proptest::prelude::*;
use rand::Rng;

fn synthetic(params: &ScmParams, hours: usize, seed: u64) -> Dataset {
    let start = Utc.with_ymd_and_hms(2023, 9, 1, 6, 0, 0).unwrap();
    simulate(start, hours, &TzRule::us_central(), params, seed)
}

fn quick_config(seed: u64) -> TrainConfig {
    TrainConfig {
        steps: 1000,
        batch_size: Some(512),
        init_scale: 1e-3,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn mape_basics() {
    assert_eq!(mape(&[5.0, 6.0], &[5.0, 6.0]).unwrap(), 0.0);
    assert!((mape(&[103.0], &[100.0]).unwrap() - 3.0).abs() < 1e-12);
    assert!(matches!(mape(&[1.0], &[0.0]), Err(EvalError::NonPositiveActual { index: 0, .. })));
    assert!(matches!(mape(&[], &[]), Err(EvalError::Empty)));
    assert!(mape(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn mape_matches_elementwise_loop() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let actual: Vec<f64> = (0..100).map(|_| rng.random_range(1000.0..5000.0)).collect();
    let predicted: Vec<f64> = actual.iter().map(|a| a + rng.random_range(-300.0..300.0)).collect();
    let mut total = 0.0;
    for i in 0..100 {
        total += ((predicted[i] - actual[i]) / actual[i]).abs();
    }
    assert!((mape(&predicted, &actual).unwrap() - total).abs() < 1e-10);
}

#[test]
fn fold_plans_partition_exhaustively() {
    for n in 0..60 {
        for k in 2..8 {
            let Ok(plan) = FoldPlan::new(n, k) else {
                assert!(n < k);
                continue;
            };
            assert_eq!(plan.folds.len(), k);
            let mut seen = vec![0u8; n];
            for f in &plan.folds {
                assert!(!f.is_empty());
                f.clone().for_each(|i| seen[i] += 1);
            }
            assert!(seen.iter().all(|&c| c == 1), "n {n} k {k}");
            let sizes: Vec<usize> = plan.folds.iter().map(|f| f.len()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            assert!(plan.folds.windows(2).all(|w| w[0].end == w[1].start));
        }
    }
    assert!(FoldPlan::new(10, 1).is_err());
}

#[test]
fn single_fold_rejected() {
    let ds = synthetic(&ScmParams::prior_means(), 100, 1);
    assert!(matches!(
        cross_validate(&ds, 1, &PriorSpec::default(), &FixedSettings::default(), &quick_config(0)),
        Err(EvalError::Split(_))
    ));
    assert!(cross_validate(&ds.slice(0..20), 5, &PriorSpec::default(), &FixedSettings::default(), &quick_config(0)).is_err());
}

#[test]
fn noiseless_self_consistency() {
    let mut p = ScmParams::prior_means();
    p.coef.demand_noise_sd = 1.0;
    let ds = synthetic(&p, 2000, 1);
    let split = ds.records()[1500].timestamp;
    let priors = PriorSpec::centred_on(&p.coef);
    let config = TrainConfig {
        steps: 200,
        init_scale: 1e-3,
        ..TrainConfig::default()
    };
    let e = train_test_eval(&ds, split, &priors, &p.fixed, &config).unwrap();
    assert!(e.report.mean_mape < 0.5, "{:?}", e.report);
    assert_eq!(e.predictions.len(), 500);
    assert_eq!(e.predictions[0].timestamp, split);
    let months: usize = e.report.month_mapes.len();
    assert!(months >= 1);
}

#[test]
fn split_must_leave_both_sides() {
    let ds = synthetic(&ScmParams::prior_means(), 50, 1);
    let before = ds.records()[0].timestamp;
    let r = train_test_eval(&ds, before, &PriorSpec::default(), &FixedSettings::default(), &quick_config(0));
    assert!(matches!(r, Err(EvalError::Split(_))));
}

#[test]
fn train_error_not_far_below_test_error() {
    let p = ScmParams::prior_means();
    for seed in 0..3 {
        let ds = synthetic(&p, 4000, 10 + seed);
        let split = ds.records()[3000].timestamp;
        let e = train_test_eval(&ds, split, &PriorSpec::default(), &p.fixed, &quick_config(seed)).unwrap();
        assert!(e.report.train_mapes[0] <= e.report.fold_mapes[0] + 2.0, "{:?}", e.report);
    }
}

#[test]
fn two_year_folds_agree() {
    let p = ScmParams::prior_means();
    let ds = synthetic(&p, 2 * 8760, 2);
    let e = cross_validate(&ds, 5, &PriorSpec::default(), &p.fixed, &quick_config(3)).unwrap();
    let r = &e.report;
    let (lo, hi) = r
        .fold_mapes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &m| (a.min(m), b.max(m)));
    assert!(hi - lo <= 2.0, "{:?}", r.fold_mapes);
    assert!((r.mean_mape - r.fold_mapes.iter().sum::<f64>() / 5.0).abs() < 1e-12);
    assert_eq!(e.predictions.len(), ds.len());
    assert_eq!(r.seeds, fold_seeds(3, 5));
    // pooled per-month figures come from the same predictions
    assert_eq!(r.month_mapes.len(), 12);
}

#[test]
fn evaluation_is_deterministic() {
    let ds = synthetic(&ScmParams::prior_means(), 600, 4);
    let split = ds.records()[400].timestamp;
    let run = || {
        let e = train_test_eval(&ds, split, &PriorSpec::default(), &FixedSettings::default(), &quick_config(9)).unwrap();
        (serde_json::to_string(&e.report).unwrap(), predictions_csv(&e.predictions))
    };
    assert_eq!(run(), run());
}

#[test]
fn predictions_csv_shape() {
    let ts = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let csv = predictions_csv(&[PredictionRow {
        timestamp: ts,
        actual_mw: 3000.0,
        predicted_mw: 3010.5,
    }]);
    assert_eq!(csv, "timestamp,actual_mw,predicted_mw\n2024-01-01T00:00:00Z,3000,3010.5\n");
}

proptest! {
    #[test]
    fn mape_scale_invariant(
        pairs in prop::collection::vec((1.0f64..1e4, -0.5f64..0.5), 1..40),
        c in 0.01f64..100.0,
    ) {
        let actual: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let predicted: Vec<f64> = pairs.iter().map(|p| p.0 * (1.0 + p.1)).collect();
        let base = mape(&predicted, &actual).unwrap();
        let scaled = mape(
            &predicted.iter().map(|v| v * c).collect::<Vec<_>>(),
            &actual.iter().map(|v| v * c).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert!((base - scaled).abs() <= 1e-9 * base.max(1.0));
    }
}
