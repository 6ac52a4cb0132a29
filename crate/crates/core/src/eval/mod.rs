//! Forecast scoring: MAPE, a chronological hold-out split and contiguous
//! k-fold cross-validation around the variational fit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::scm::FixedSettings;
use crate::svi::{train, GuideState, PriorSpec, SviError, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("predicted and actual lengths differ ({predicted} vs {actual})")]
    Length { predicted: usize, actual: usize },
    #[error("nothing to score")]
    Empty,
    #[error("actual value {value} at index {index} is not positive")]
    NonPositiveActual { index: usize, value: f64 },
    #[error("{0}")]
    Split(String),
    #[error(transparent)]
    Svi(#[from] SviError),
}

/// 100 · mean(|predicted − actual| / actual).
pub fn mape(predicted: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::Length {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut total = 0.0;
    for (index, (p, &a)) in predicted.iter().zip(actual).enumerate() {
        if !(a > 0.0) {
            return Err(EvalError::NonPositiveActual { index, value: a });
        }
        total += (p - a).abs() / a;
    }
    Ok(100.0 * total / actual.len() as f64)
}

/// Contiguous index blocks partitioning `0..n`; the first `n mod k` blocks
/// hold one extra record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Range<usize>>,
}

impl FoldPlan {
    pub fn new(n: usize, k: usize) -> Result<Self, EvalError> {
        if k < 2 {
            return Err(EvalError::Split(format!("need at least 2 folds, got {k}")));
        }
        if n < k {
            return Err(EvalError::Split(format!("{n} records cannot fill {k} folds")));
        }
        let (base, extra) = (n / k, n % k);
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for i in 0..k {
            let len = base + usize::from(i < extra);
            folds.push(start..start + len);
            start += len;
        }
        Ok(Self { k, folds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub timestamp: DateTime<Utc>,
    pub actual_mw: f64,
    pub predicted_mw: f64,
}

/// `timestamp,actual_mw,predicted_mw` CSV.
pub fn predictions_csv(rows: &[PredictionRow]) -> String {
    let mut out = String::from("timestamp,actual_mw,predicted_mw\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            r.actual_mw,
            r.predicted_mw
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// held-out MAPE per fold (a single entry for a hold-out split)
    pub fold_mapes: Vec<f64>,
    pub mean_mape: f64,
    /// in-sample MAPE per fold
    pub train_mapes: Vec<f64>,
    /// held-out MAPE by calendar month over all scored records
    pub month_mapes: BTreeMap<u32, f64>,
    pub seeds: Vec<u64>,
    pub diverged: bool,
    /// file holding the predicted-vs-actual series, filled in by the caller
    pub series: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub predictions: Vec<PredictionRow>,
    pub fits: Vec<TrainReport>,
}

/// Plug-in predictions of the guide for every record, the same point
/// forecast as [`crate::svi::posterior_predict`].
pub fn predict_dataset(guide: &GuideState, fixed: &FixedSettings, ds: &Dataset) -> Result<Vec<PredictionRow>, EvalError> {
    let params = guide.plug_in(fixed)?;
    Ok(ds
        .iter()
        .map(|r| PredictionRow {
            timestamp: r.timestamp,
            actual_mw: r.demand,
            predicted_mw: crate::scm::predict_demand(r.calendar, &r.weather, &params),
        })
        .collect())
}

pub fn score(rows: &[PredictionRow]) -> Result<f64, EvalError> {
    let p: Vec<f64> = rows.iter().map(|r| r.predicted_mw).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.actual_mw).collect();
    mape(&p, &a)
}

fn month_breakdown(rows: &[PredictionRow], ds: &Dataset) -> Result<BTreeMap<u32, f64>, EvalError> {
    let mut groups: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (row, rec) in rows.iter().zip(ds.iter()) {
        let g = groups.entry(rec.calendar.month()).or_default();
        g.0.push(row.predicted_mw);
        g.1.push(row.actual_mw);
    }
    groups.into_iter().map(|(m, (p, a))| Ok((m, mape(&p, &a)?))).collect()
}

struct FoldOutcome {
    train_mape: f64,
    test_mape: f64,
    predictions: Vec<PredictionRow>,
    fit: TrainReport,
}

fn fit_and_score(
    train_ds: &Dataset,
    test_ds: &Dataset,
    priors: &PriorSpec,
    fixed: &FixedSettings,
    config: &TrainConfig,
) -> Result<FoldOutcome, EvalError> {
    let fit = train(train_ds, priors, fixed, config)?;
    let train_mape = score(&predict_dataset(&fit.guide, fixed, train_ds)?)?;
    let predictions = predict_dataset(&fit.guide, fixed, test_ds)?;
    Ok(FoldOutcome {
        train_mape,
        test_mape: score(&predictions)?,
        predictions,
        fit,
    })
}

/// Trains on records before `split` and scores both sides.
pub fn train_test_eval(
    ds: &Dataset,
    split: DateTime<Utc>,
    priors: &PriorSpec,
    fixed: &FixedSettings,
    config: &TrainConfig,
) -> Result<Evaluation, EvalError> {
    let train_ds = ds.filter(|r| r.timestamp < split);
    let test_ds = ds.filter(|r| r.timestamp >= split);
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(EvalError::Split(format!(
            "split at {split} leaves {} training and {} test records",
            train_ds.len(),
            test_ds.len()
        )));
    }
    let out = fit_and_score(&train_ds, &test_ds, priors, fixed, config)?;
    Ok(Evaluation {
        report: EvalReport {
            fold_mapes: vec![out.test_mape],
            mean_mape: out.test_mape,
            train_mapes: vec![out.train_mape],
            month_mapes: month_breakdown(&out.predictions, &test_ds)?,
            seeds: vec![config.seed],
            diverged: out.fit.diverged,
            series: None,
        },
        predictions: out.predictions,
        fits: vec![out.fit],
    })
}

/// Per-fold seeds drawn from a generator seeded with the master seed.
pub fn fold_seeds(master: u64, k: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    (0..k).map(|_| rng.next_u64()).collect()
}

/// Contiguous k-fold cross-validation: each block is scored by a model
/// trained on all other blocks.
pub fn cross_validate(
    ds: &Dataset,
    k: usize,
    priors: &PriorSpec,
    fixed: &FixedSettings,
    config: &TrainConfig,
) -> Result<Evaluation, EvalError> {
    if k < 2 {
        return Err(EvalError::Split(format!("need at least 2 folds, got {k}")));
    }
    if ds.len() < 5 * k {
        return Err(EvalError::Split(format!("{} records are too few for {k} folds", ds.len())));
    }
    let plan = FoldPlan::new(ds.len(), k)?;
    let seeds = fold_seeds(config.seed, k);
    let mut report = EvalReport {
        fold_mapes: Vec::with_capacity(k),
        mean_mape: 0.0,
        train_mapes: Vec::with_capacity(k),
        month_mapes: BTreeMap::new(),
        seeds: seeds.clone(),
        diverged: false,
        series: None,
    };
    let mut predictions = Vec::with_capacity(ds.len());
    let mut fits = Vec::with_capacity(k);
    for (range, seed) in plan.folds.iter().zip(&seeds) {
        let fold_config = TrainConfig {
            seed: *seed,
            ..config.clone()
        };
        let out = fit_and_score(&ds.without(range.clone()), &ds.slice(range.clone()), priors, fixed, &fold_config)?;
        report.fold_mapes.push(out.test_mape);
        report.train_mapes.push(out.train_mape);
        report.diverged |= out.fit.diverged;
        predictions.extend(out.predictions);
        fits.push(out.fit);
    }
    report.mean_mape = report.fold_mapes.iter().sum::<f64>() / k as f64;
    report.month_mapes = month_breakdown(&predictions, ds)?;
    Ok(Evaluation {
        report,
        predictions,
        fits,
    })
}

#[cfg(test)]
mod tests;
