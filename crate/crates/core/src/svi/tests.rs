use super::*;
use crate::data::{Dataset, TzRule};
use crate::scm::{predict_demand, simulate, FixedSettings, ScmParams};
use approx::assert_relative_eq;
use chrono::{TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn synthetic(hours: usize, seed: u64) -> Dataset {
    let start = Utc.with_ymd_and_hms(2023, 9, 1, 6, 0, 0).unwrap();
    simulate(start, hours, &TzRule::us_central(), &ScmParams::prior_means(), seed)
}

#[test]
fn kl_identity_guide_at_prior_no_data() {
    // guide equal to the prior: log p(u) − log q(u) has expectation zero
    let priors = PriorSpec::default();
    let mut guide = GuideState::from_prior(&priors);
    for (g, p) in guide.entries.iter_mut().zip(&priors.entries) {
        g.log_sd = p.scale.ln();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let fixed = FixedSettings::default();
    let n = 10_000;
    let values: Vec<f64> = (0..n)
        .map(|_| elbo_estimate(&[], 1.0, &priors, &guide, &fixed, &mut rng, 1).unwrap().value)
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(mean.abs() <= 3.0 * se + 1e-9, "mean {mean}, se {se}");
    // each draw is identically zero when q = p
    assert!(values.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn conjugate_normal_posterior_mean() {
    // y_i ~ N(mu, 1), mu ~ N(0, 10): posterior mean = Σy / (n + 1/100)
    let ys: Vec<f64> = (0..20).map(|i| 1.5 + 0.3 * ((i as f64) * 1.7).sin()).collect();
    let prior = vec![PriorEntry {
        name: "mu".into(),
        family: Family::Normal,
        location: 0.0,
        scale: 10.0,
    }];
    let post_prec = ys.len() as f64 + 1.0 / 100.0;
    let post_mean = ys.iter().sum::<f64>() / post_prec;
    let post_sd = post_prec.powf(-0.5);

    let mut guide = GuideState {
        harmonic_order: 0,
        entries: vec![GuideEntry {
            name: "mu".into(),
            log_space: false,
            mean: 0.0,
            log_sd: 0.0,
        }],
    };
    let mut adam = AdamState::new(2);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let lik = |t: &[f64]| {
        let v = ys.iter().map(|y| -0.5 * (y - t[0]).powi(2)).sum::<f64>();
        let g = ys.iter().map(|y| y - t[0]).sum::<f64>();
        Ok((v, vec![g]))
    };
    // iterate average over the last 1000 steps
    let (mut mean_avg, mut sd_avg) = (0.0, 0.0);
    for step in 0..4000 {
        let noise = draw_noise(&mut rng, 1, 4);
        let est = elbo_custom(lik, &prior, &guide, &noise).unwrap();
        let mut flat = guide.to_flat();
        adam.step(&est.grad, &mut flat).unwrap();
        guide.set_flat(&flat).unwrap();
        if step >= 3000 {
            mean_avg += guide.entries[0].mean / 1000.0;
            sd_avg += guide.entries[0].sd() / 1000.0;
        }
    }
    assert!((mean_avg - post_mean).abs() < 1e-2, "{mean_avg} vs {post_mean}");
    assert!((sd_avg - post_sd).abs() < 0.1 * post_sd, "{sd_avg} vs {post_sd}");
}

#[test]
fn gradient_matches_finite_differences() {
    let ds = synthetic(100, 2);
    let priors = PriorSpec::default();
    let fixed = FixedSettings::default();
    let data = prepare(&ds, &fixed);
    let refs: Vec<&PreparedRecord> = data.iter().collect();
    let mut guide = GuideState::from_prior(&priors);
    // move away from the prior mean and shrink spreads
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut flat = guide.to_flat();
    let d = guide.len();
    for (i, x) in flat.iter_mut().enumerate() {
        let z: f64 = rand::Rng::random_range(&mut rng, -1.0..1.0);
        if i < d {
            *x += 0.01 * z * x.abs().max(1.0);
        } else {
            *x -= 2.0;
        }
    }
    guide.set_flat(&flat).unwrap();
    let noise = draw_noise(&mut rng, d, 1);
    let est = elbo_with_noise(&refs, 1.0, &priors, &guide, &fixed, &noise).unwrap();
    let h = 1e-5;
    for i in 0..2 * d {
        let eval = |x: f64| {
            let mut f = flat.clone();
            f[i] = x;
            let mut g = guide.clone();
            g.set_flat(&f).unwrap();
            elbo_with_noise(&refs, 1.0, &priors, &g, &fixed, &noise).unwrap().value
        };
        let fd = (eval(flat[i] + h) - eval(flat[i] - h)) / (2.0 * h);
        let rel = fd_relative_error(est.grad[i], fd);
        assert!(rel < 1e-4, "coordinate {i}: tape {} fd {fd}", est.grad[i]);
    }
}

#[test]
fn zero_steps_returns_initial_guide() {
    let ds = synthetic(24, 1);
    let priors = PriorSpec::default();
    let config = TrainConfig {
        steps: 0,
        ..TrainConfig::default()
    };
    let r = train(&ds, &priors, &FixedSettings::default(), &config).unwrap();
    assert!(r.elbo_trace.is_empty());
    assert_eq!(r.guide, GuideState::from_prior(&priors));
}

#[test]
fn training_is_deterministic_and_trace_sized() {
    let ds = synthetic(300, 3);
    let priors = PriorSpec::default();
    let config = TrainConfig {
        steps: 30,
        batch_size: Some(64),
        seed: 17,
        ..TrainConfig::default()
    };
    let fixed = FixedSettings::default();
    let a = train(&ds, &priors, &fixed, &config).unwrap();
    let b = train(&ds, &priors, &fixed, &config).unwrap();
    assert_eq!(a.elbo_trace.len(), 30);
    assert!(!a.diverged);
    assert_eq!(
        a.elbo_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.elbo_trace.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn empty_dataset_rejected() {
    let r = train(&Dataset::default(), &PriorSpec::default(), &FixedSettings::default(), &TrainConfig::default());
    assert!(matches!(r, Err(SviError::EmptyDataset)));
}

#[test]
fn concentrated_guide_predicts_like_the_model() {
    let p = ScmParams::prior_means();
    let priors = PriorSpec::default();
    let guide = GuideState::concentrated(&p.coef, &priors, -30.0);
    let r = synthetic(5, 1).records()[3];
    let (mean, sd) = posterior_predict(&guide, &p.fixed, r.calendar, &r.weather).unwrap();
    assert_relative_eq!(mean, predict_demand(r.calendar, &r.weather, &p), max_relative = 1e-12);
    assert_relative_eq!(sd, p.coef.demand_noise_sd, max_relative = 1e-9);
}

#[test]
fn monte_carlo_prediction_matches_plug_in_when_linear() {
    // with the lighting term inactive and wind between thresholds the
    // demand mean is linear in the latents, so E_q[mean] is the plug-in value
    let priors = PriorSpec::default();
    let guide = GuideState::from_prior(&priors);
    let fixed = FixedSettings::default();
    let cal = crate::data::CalendarPoint::new(2, 4).unwrap();
    let w = crate::data::WeatherObservation {
        temperature: 60.0,
        humidity: 0.4,
        wind_speed: 10.0,
        radiation: 0.0,
    };
    let (plug, plug_sd) = posterior_predict(&guide, &fixed, cal, &w).unwrap();
    let draws = 10_000;
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (mc, mc_sd) = posterior_predict_mc(&guide, &fixed, cal, &w, &mut rng, draws).unwrap();
    let spread_sd = (mc_sd * mc_sd - plug_sd * plug_sd).max(0.0).sqrt();
    let se = mc_sd / (draws as f64).sqrt();
    assert!((mc - plug).abs() < 3.0 * se, "mc {mc} plug {plug} se {se} spread {spread_sd}");
    assert!(plug_sd >= guide.entry("demand_noise_sd").unwrap().natural_moments().0 - 1e-12);
    assert!(mc_sd >= plug_sd * 0.9);
}

#[test]
fn snapshot_and_trace_serialise() {
    let ds = synthetic(24, 1);
    let priors = PriorSpec::default();
    let fixed = FixedSettings::default();
    let config = TrainConfig {
        steps: 3,
        ..TrainConfig::default()
    };
    let r = train(&ds, &priors, &fixed, &config).unwrap();
    let snap = PosteriorSnapshot::new(&r, &fixed, serde_json::to_value(&config).unwrap());
    let text = serde_json::to_string(&snap).unwrap();
    let back: PosteriorSnapshot = serde_json::from_str(&text).unwrap();
    assert_eq!(back, snap);
    assert!(snap.latents.contains_key("demand_base"));
    let csv = elbo_trace_csv(&r.elbo_trace);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("step,elbo\n0,"));
}
