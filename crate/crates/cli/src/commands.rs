use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use gridcause::analysis::{
    self, backdoor_check, compare_approaches, conditional_humidity_effect, correlation_with_density,
    grid_search_threshold, radiation_regimes, regime_effects, seasonal_variance, summer_winter_ratio, wind_regimes,
    LinearScmInstance, Regressor, TemperatureDesign, TEMP_COLUMN,
};
use gridcause::data::{
    ingest_load_csv, ingest_weather_csv, join_hourly, read_canonical, split_by_range, write_canonical_string,
    ColumnMapping, Dataset,
};
use gridcause::eval::{cross_validate, predict_dataset, predictions_csv, score, train_test_eval, Evaluation};
use gridcause::scm::simulate;
use gridcause::svi::{elbo_trace_csv, train, PosteriorSnapshot};

use crate::config::{parse_instant, read_text, Need, RunConfig};
use crate::error::CliError;
use crate::manifest::RunWriter;

/// Lines a command prints on success.
pub type Messages = Vec<String>;

fn check(cfg: &RunConfig, needs: &[Need]) -> Result<(), CliError> {
    let problems = cfg.validate(needs);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(problems))
    }
}

fn load_data(cfg: &RunConfig, w: &mut RunWriter, path: &Path) -> Result<Dataset, CliError> {
    w.input(path)?;
    Ok(read_canonical(path, &cfg.tz()?)?)
}

/// The dataset restricted to `[range_start, range_end)` when either is set.
fn ranged(cfg: &RunConfig, ds: Dataset) -> Result<Dataset, CliError> {
    if cfg.range_start.is_none() && cfg.range_end.is_none() {
        return Ok(ds);
    }
    let start = match &cfg.range_start {
        Some(s) => parse_instant(s)?,
        None => chrono::DateTime::<chrono::Utc>::MIN_UTC,
    };
    let end = match &cfg.range_end {
        Some(s) => parse_instant(s)?,
        None => chrono::DateTime::<chrono::Utc>::MAX_UTC,
    };
    Ok(split_by_range(&ds, start, end))
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn ingest(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::LoadAndWeather])?;
    let mut w = RunWriter::new(&cfg.out, &["ingest"])?;
    let mapping = match &cfg.column_mapping {
        Some(p) => {
            w.input(p)?;
            ColumnMapping::from_json_file(p)?
        }
        None => ColumnMapping::default(),
    };
    let (load_path, weather_path) = (cfg.load_csv.as_ref().unwrap(), cfg.weather_csv.as_ref().unwrap());
    w.input(load_path)?;
    w.input(weather_path)?;
    let (load, load_meta) = ingest_load_csv(load_path, &cfg.tz()?, &mapping.load)?;
    let (weather, weather_meta) = ingest_weather_csv(weather_path, &mapping.weather)?;
    let (ds, join_meta) = join_hourly(&load, &weather)?;
    w.write("dataset.csv", write_canonical_string(&ds))?;
    w.write_json("ingest_meta.json", &json!({ "load": load_meta, "weather": weather_meta, "join": join_meta }))?;
    w.finish(cfg)?;
    Ok(vec![
        format!("joined {} hourly records", ds.len()),
        format!(
            "dropped {} load-only and {} weather-only hours",
            join_meta.dropped_load_only, join_meta.dropped_weather_only
        ),
    ])
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[])?;
    let mut w = RunWriter::new(&cfg.out, &["simulate"])?;
    if let Some(p) = &cfg.params {
        w.input(p)?;
    }
    let params = cfg.scm_params()?;
    let start = parse_instant(&cfg.start)?;
    let ds = simulate(start, cfg.hours, &cfg.tz()?, &params, cfg.seed);
    w.write("dataset.csv", write_canonical_string(&ds))?;
    w.write("params.json", params.to_json() + "\n")?;
    w.finish(cfg)?;
    Ok(vec![format!("simulated {} hourly records with seed {}", ds.len(), cfg.seed)])
}

#[derive(Serialize)]
struct TrainSummary {
    records: usize,
    steps_completed: usize,
    diverged: bool,
    final_elbo: Option<f64>,
    train_mape: f64,
}

pub fn train_cmd(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["train"])?;
    let ds = ranged(cfg, load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?)?;
    if let Some(p) = &cfg.priors {
        w.input(p)?;
    }
    let fixed = cfg.fixed_settings()?;
    let priors = cfg.priors_spec(&fixed)?;
    let config = cfg.train_config();
    let started = Instant::now();
    let report = train(&ds, &priors, &fixed, &config)?;
    eprintln!("training took {:.1} s", started.elapsed().as_secs_f64());
    let snapshot = PosteriorSnapshot::new(&report, &fixed, serde_json::to_value(&config).expect("config serialises"));
    let train_mape = score(&predict_dataset(&report.guide, &fixed, &ds)?)?;
    w.write_json("posterior.json", &snapshot)?;
    w.write("elbo_trace.csv", elbo_trace_csv(&report.elbo_trace))?;
    let summary = TrainSummary {
        records: ds.len(),
        steps_completed: report.steps_completed,
        diverged: report.diverged,
        final_elbo: report.elbo_trace.last().copied().filter(|v| v.is_finite()),
        train_mape,
    };
    w.write_json("train_summary.json", &summary)?;
    w.finish(cfg)?;
    let mut msgs = vec![format!(
        "trained on {} records for {} steps{}",
        ds.len(),
        report.steps_completed,
        if report.diverged { " (diverged; last good guide kept)" } else { "" }
    )];
    for name in ["demand_base", "hvac_slope", "demand_noise_sd"] {
        if let Some(s) = report.posterior.get(name) {
            msgs.push(format!("{name}: mean {:.4} sd {:.4}", s.mean, s.sd));
        }
    }
    msgs.push(format!("train MAPE: {train_mape:.6}%"));
    Ok(msgs)
}

pub fn predict_cmd(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data, Need::Posterior])?;
    let mut w = RunWriter::new(&cfg.out, &["predict"])?;
    let post_path = cfg.posterior.as_ref().unwrap();
    w.input(post_path)?;
    let snapshot: PosteriorSnapshot = serde_json::from_str(&read_text(post_path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", post_path.display())))?;
    let ds = ranged(cfg, load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?)?;
    let rows = predict_dataset(&snapshot.guide, &snapshot.fixed, &ds)?;
    let sd = snapshot.latents.get("demand_noise_sd").map(|s| s.mean).unwrap_or(f64::NAN);
    let body = csv(
        "timestamp,actual_mw,predicted_mw,predictive_sd_mw",
        rows.iter().map(|r| {
            vec![
                r.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                r.actual_mw.to_string(),
                r.predicted_mw.to_string(),
                sd.to_string(),
            ]
        }),
    );
    w.write("predictions.csv", body)?;
    let m = score(&rows)?;
    w.write_json("predict_summary.json", &json!({ "records": rows.len(), "mape": m }))?;
    w.finish(cfg)?;
    Ok(vec![format!("predicted {} records", rows.len()), format!("MAPE: {m:.6}%")])
}

fn write_evaluation(w: &mut RunWriter, prefix: &str, mut ev: Evaluation) -> Result<Evaluation, CliError> {
    let series = format!("{prefix}_predictions.csv");
    w.write(&series, predictions_csv(&ev.predictions))?;
    ev.report.series = Some(series);
    w.write_json(&format!("{prefix}_report.json"), &ev.report)?;
    Ok(ev)
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["evaluate"])?;
    let ds = load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?;
    let fixed = cfg.fixed_settings()?;
    let priors = cfg.priors_spec(&fixed)?;
    let ev = train_test_eval(&ds, parse_instant(&cfg.split)?, &priors, &fixed, &cfg.train_config())?;
    let ev = write_evaluation(&mut w, "eval", ev)?;
    w.finish(cfg)?;
    Ok(vec![
        format!("train MAPE: {:.6}%", ev.report.train_mapes[0]),
        format!("test MAPE: {:.6}%", ev.report.mean_mape),
    ])
}

pub fn crossval_cmd(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["crossval"])?;
    let ds = load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?;
    let fixed = cfg.fixed_settings()?;
    let priors = cfg.priors_spec(&fixed)?;
    let ev = cross_validate(&ds, cfg.folds, &priors, &fixed, &cfg.train_config())?;
    let ev = write_evaluation(&mut w, "crossval", ev)?;
    w.finish(cfg)?;
    let mut msgs: Messages = ev
        .report
        .fold_mapes
        .iter()
        .enumerate()
        .map(|(i, m)| format!("fold {}: MAPE {m:.6}%", i + 1))
        .collect();
    msgs.push(format!("mean MAPE: {:.6}%", ev.report.mean_mape));
    Ok(msgs)
}

pub fn analyze_humidity(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["analyze", "humidity"])?;
    let ds = load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?;
    let humidity: Vec<f64> = ds.iter().map(|r| r.weather.humidity).collect();
    let (r, density) = correlation_with_density(&humidity, &ds.demand())?;
    let (lo, hi) = density.interval(0.95);
    let (wlo, whi) = density.interval(0.999_999);
    let k = cfg.density_points;
    let curve = (0..k).map(|i| {
        let rho = wlo + (whi - wlo) * i as f64 / (k - 1) as f64;
        vec![rho.to_string(), density.density(rho).to_string()]
    });
    w.write("humidity_density.csv", csv("rho,density", curve))?;

    let effect = conditional_humidity_effect(&ds, cfg.temp_threshold, &cfg.hour_window, &cfg.month_window)?;
    let (best, scores) = grid_search_threshold(&ds, &cfg.threshold_grid)?;
    w.write(
        "humidity_grid.csv",
        csv("threshold_f,correlation", scores.iter().map(|(t, s)| vec![t.to_string(), opt(*s)])),
    )?;
    w.write_json(
        "humidity.json",
        &json!({
            "records": ds.len(),
            "correlation": r,
            "interval_95": [lo, hi],
            "density_mode": density.mode(),
            "density_mass": density.integrate(),
            "stratum": {
                "temp_above_f": cfg.temp_threshold,
                "hours": cfg.hour_window,
                "months": cfg.month_window,
                "records": effect.fit.n,
                "slope": effect.slope,
                "slope_se": effect.slope_se,
                "demand_sd": effect.demand_sd,
            },
            "best_threshold_f": best,
        }),
    )?;
    w.finish(cfg)?;
    Ok(vec![
        format!("corr(humidity, demand) = {r:.4}  95% interval [{lo:.4}, {hi:.4}]"),
        format!(
            "above {} F: humidity slope {:.1} MW (se {:.1}), demand sd {:.1} MW over {} records",
            cfg.temp_threshold, effect.slope, effect.slope_se, effect.demand_sd, effect.fit.n
        ),
        format!("best humidity threshold: {best} F"),
    ])
}

pub fn analyze_temperature(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["analyze", "temperature"])?;
    let ds = load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?;
    let (train_ds, test_ds) = match &cfg.test_data {
        Some(p) => (ds, Some(load_data(cfg, &mut w, p)?)),
        None => {
            let split = parse_instant(&cfg.split)?;
            let before = ds.filter(|r| r.timestamp < split);
            let after = ds.filter(|r| r.timestamp >= split);
            if before.is_empty() || after.is_empty() {
                (ds, None)
            } else {
                (before, Some(after))
            }
        }
    };
    let design = TemperatureDesign {
        temp_mid: cfg.fixed_settings()?.temp_mid,
        ..TemperatureDesign::default()
    };
    let cmp = compare_approaches(&design, &train_ds, test_ds.as_ref())?;
    let mut fwl = BTreeMap::new();
    for m in &cmp.months {
        let f = design.fwl(&train_ds.month(m.month))?;
        fwl.insert(m.month, f.coef(TEMP_COLUMN).expect("column present"));
    }
    let rows = cmp.months.iter().map(|m| {
        vec![
            m.month.to_string(),
            m.train_n.to_string(),
            m.coef_approach1.to_string(),
            m.coef_approach2.to_string(),
            fwl[&m.month].to_string(),
            m.deviation.to_string(),
            opt(m.mape_approach1),
            opt(m.mape_approach2),
            opt(m.mape_gap()),
        ]
    });
    w.write(
        "temperature.csv",
        csv(
            "month,train_n,coef_approach1,coef_approach2,coef_fwl,deviation,mape_approach1,mape_approach2,mape_gap",
            rows,
        ),
    )?;
    let fwl_gap = cmp
        .months
        .iter()
        .map(|m| (fwl[&m.month] - m.coef_approach2).abs())
        .fold(0.0, f64::max);
    w.write_json("temperature.json", &json!({ "comparison": cmp, "max_fwl_difference": fwl_gap }))?;
    w.finish(cfg)?;
    let mut msgs = vec![format!(
        "mean coefficient deviation: {:.2}% (size-weighted {:.2}%) over {} months",
        100.0 * cmp.mean_deviation,
        100.0 * cmp.weighted_deviation,
        cmp.months.len()
    )];
    if let Some(g) = cmp.mean_mape_gap {
        msgs.push(format!("mean held-out MAPE gap: {:.2}%", 100.0 * g));
    }
    msgs.push(format!("largest FWL vs joint difference: {fwl_gap:.3e}"));
    Ok(msgs)
}

fn analyze_regimes(cfg: &RunConfig, name: &str, regimes: &[analysis::Stratum], regressor: Regressor) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["analyze", name])?;
    let ds = load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?;
    let (fitted, skipped) = regime_effects(&ds, regimes, regressor);
    let rows = fitted.iter().map(|e| {
        vec![
            e.stratum.name.clone(),
            e.fit.n.to_string(),
            e.slope.to_string(),
            e.slope_se.to_string(),
            e.fit.coef("intercept").expect("intercept").to_string(),
            e.demand_sd.to_string(),
        ]
    });
    w.write(&format!("{name}.csv"), csv("regime,records,slope,slope_se,intercept,demand_sd", rows))?;
    let skipped_json: Vec<_> = skipped.iter().map(|(n, c)| json!({ "regime": n, "records": c })).collect();
    w.write_json(
        &format!("{name}.json"),
        &json!({ "regressor": regressor, "regimes": fitted, "skipped": skipped_json }),
    )?;
    w.finish(cfg)?;
    let mut msgs: Messages = fitted
        .iter()
        .map(|e| format!("{}: slope {:.4} (se {:.4}) over {} records", e.stratum.name, e.slope, e.slope_se, e.fit.n))
        .collect();
    msgs.extend(skipped.iter().map(|(n, c)| format!("{n}: skipped, only {c} records")));
    Ok(msgs)
}

pub fn analyze_radiation(cfg: &RunConfig) -> Result<Messages, CliError> {
    analyze_regimes(cfg, "radiation", &radiation_regimes(), Regressor::Radiation)
}

pub fn analyze_wind(cfg: &RunConfig) -> Result<Messages, CliError> {
    analyze_regimes(cfg, "wind", &wind_regimes(), Regressor::WindSpeed)
}

pub fn analyze_backdoor(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[])?;
    let mut w = RunWriter::new(&cfg.out, &["analyze", "backdoor"])?;
    let instance = match &cfg.backdoor_instance {
        Some(p) => {
            w.input(p)?;
            serde_json::from_str(&read_text(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?
        }
        None => LinearScmInstance::default(),
    };
    let r = backdoor_check(&instance, cfg.backdoor_samples, cfg.seed)?;
    let rows = [
        ("regression_coef", r.regression_coef),
        ("regression_se", r.regression_se),
        ("do_coef", r.do_coef),
        ("abs_diff", r.abs_diff),
        ("naive_coef", r.naive_coef),
        ("naive_se", r.naive_se),
        ("naive_population", r.naive_population),
    ];
    w.write(
        "backdoor.csv",
        csv("quantity,value", rows.iter().map(|(k, v)| vec![k.to_string(), v.to_string()])),
    )?;
    w.write_json("backdoor.json", &json!({ "instance": instance, "result": r }))?;
    w.finish(cfg)?;
    Ok(vec![
        format!("regression_coef = {:.6} (se {:.6})", r.regression_coef, r.regression_se),
        format!("do_coef = {:.6}", r.do_coef),
        format!("abs_diff = {:.6} ({:.2} se)", r.abs_diff, r.abs_diff / r.regression_se),
        format!("naive_coef = {:.6}", r.naive_coef),
    ])
}

pub fn analyze_variance(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[Need::Data])?;
    let mut w = RunWriter::new(&cfg.out, &["analyze", "variance"])?;
    let ds = load_data(cfg, &mut w, cfg.data.as_ref().unwrap())?;
    let table = seasonal_variance(&ds)?;
    let ratio = summer_winter_ratio(&table);
    let rows = table.iter().map(|(m, v)| {
        vec![
            m.to_string(),
            v.n.to_string(),
            v.mean.to_string(),
            v.variance.to_string(),
            v.variance.sqrt().to_string(),
        ]
    });
    w.write("variance.csv", csv("month,records,mean_mw,variance_mw2,sd_mw", rows))?;
    w.write_json("variance.json", &json!({ "months": table, "summer_winter_ratio": ratio }))?;
    w.finish(cfg)?;
    let mut msgs: Messages = table
        .iter()
        .map(|(m, v)| format!("month {m:>2}: sd {:.1} MW over {} records", v.variance.sqrt(), v.n))
        .collect();
    msgs.push(match ratio {
        Some(r) => format!("summer/winter variance ratio: {r:.4}"),
        None => "summer/winter variance ratio: needs both Jun-Aug and Dec-Feb data".to_string(),
    });
    Ok(msgs)
}

/// Artefacts gathered by `report`, in presentation order.
const REPORT_SECTIONS: &[(&str, &[&str])] = &[
    ("humidity", &["humidity.json", "humidity_density.csv", "humidity_grid.csv"]),
    ("temperature", &["temperature.json", "temperature.csv"]),
    ("radiation", &["radiation.json", "radiation.csv"]),
    ("wind", &["wind.json", "wind.csv"]),
    ("backdoor", &["backdoor.json", "backdoor.csv"]),
    ("variance", &["variance.json", "variance.csv"]),
    ("train", &["train_summary.json", "elbo_trace.csv"]),
    ("predict", &["predict_summary.json", "predictions.csv"]),
    ("evaluate", &["eval_report.json", "eval_predictions.csv"]),
    ("crossval", &["crossval_report.json", "crossval_predictions.csv"]),
];

/// Copies earlier analysis outputs from the output directory into
/// `report/`, with one summary JSON and an index of the plot-ready CSVs.
pub fn report_cmd(cfg: &RunConfig) -> Result<Messages, CliError> {
    check(cfg, &[])?;
    let mut w = RunWriter::new(&cfg.out, &["report"])?;
    let mut summary = serde_json::Map::new();
    let mut index = String::from("section,file\n");
    let mut found = 0;
    for (section, files) in REPORT_SECTIONS {
        for file in *files {
            let src = cfg.out.join(file);
            if !src.exists() {
                continue;
            }
            w.input(&src)?;
            let bytes = std::fs::read(&src).map_err(|e| CliError::io(&src, e))?;
            if file.ends_with(".json") {
                let value: serde_json::Value =
                    serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", src.display())))?;
                summary.insert(section.to_string(), value);
            } else {
                w.write(&format!("report/{file}"), &bytes)?;
                writeln!(index, "{section},{file}").expect("writing to a String cannot fail");
            }
            found += 1;
        }
    }
    if found == 0 {
        return Err(CliError::Input(format!(
            "no analysis outputs found in {}; run analyze, train or evaluate first",
            cfg.out.display()
        )));
    }
    w.write_json("report/summary.json", &summary)?;
    w.write("report/index.csv", index)?;
    w.finish(cfg)?;
    Ok(vec![format!(
        "report with {} sections written to {}",
        summary.len(),
        cfg.out.join("report").display()
    )])
}
