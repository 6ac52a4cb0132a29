use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::Args;
use serde::{Deserialize, Serialize};

use gridcause::data::TzRule;
use gridcause::scm::{FixedSettings, ScmParams, SolarTable};
use gridcause::svi::{PriorSpec, TrainConfig};

use crate::error::CliError;

/// Everything a command needs, as one flat JSON document. Flags given on
/// the command line replace the matching keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// canonical dataset CSV read by train, predict, evaluate, crossval and analyze
    pub data: Option<PathBuf>,
    pub load_csv: Option<PathBuf>,
    pub weather_csv: Option<PathBuf>,
    pub column_mapping: Option<PathBuf>,
    /// posterior snapshot read by predict
    pub posterior: Option<PathBuf>,
    /// structural parameters for simulate
    pub params: Option<PathBuf>,
    pub priors: Option<PathBuf>,
    pub solar_table: Option<PathBuf>,
    pub backdoor_instance: Option<PathBuf>,
    /// held-out dataset for the temperature comparison
    pub test_data: Option<PathBuf>,
    pub out: PathBuf,
    /// `us_central` or `utc`
    pub timezone: String,
    pub seed: u64,

    pub start: String,
    pub hours: usize,

    pub steps: usize,
    pub learning_rate: f64,
    pub n_particles: usize,
    pub batch_size: Option<usize>,
    pub init_scale: f64,

    pub temp_mid: Option<f64>,
    pub humid_temp_threshold: Option<f64>,
    pub wind_cold_threshold: Option<f64>,
    pub wind_hot_threshold: Option<f64>,
    pub active_hours: Option<Vec<u8>>,

    /// optional [range_start, range_end) filter applied by train and predict
    pub range_start: Option<String>,
    pub range_end: Option<String>,
    pub split: String,
    pub folds: usize,

    pub temp_threshold: f64,
    pub hour_window: Vec<u32>,
    pub month_window: Vec<u32>,
    pub threshold_grid: Vec<f64>,
    pub backdoor_samples: usize,
    pub density_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let svi = TrainConfig::default();
        Self {
            data: None,
            load_csv: None,
            weather_csv: None,
            column_mapping: None,
            posterior: None,
            params: None,
            priors: None,
            solar_table: None,
            backdoor_instance: None,
            test_data: None,
            out: PathBuf::from("out"),
            timezone: "us_central".into(),
            seed: 0,
            start: "2023-09-01T05:00:00Z".into(),
            hours: 8760,
            steps: svi.steps,
            learning_rate: svi.learning_rate,
            n_particles: svi.n_particles,
            batch_size: svi.batch_size,
            init_scale: svi.init_scale,
            temp_mid: None,
            humid_temp_threshold: None,
            wind_cold_threshold: None,
            wind_hot_threshold: None,
            active_hours: None,
            range_start: None,
            range_end: None,
            split: "2024-09-01T05:00:00Z".into(),
            folds: 5,
            temp_threshold: 75.0,
            hour_window: Vec::new(),
            month_window: Vec::new(),
            threshold_grid: vec![60.0, 65.0, 70.0, 75.0, 80.0, 85.0],
            backdoor_samples: 100_000,
            density_points: 401,
        }
    }
}

/// Command-line replacements for [`RunConfig`] keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration (a manifest written by an earlier run also works)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub load_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    pub weather_csv: Option<PathBuf>,
    #[arg(long, global = true)]
    pub column_mapping: Option<PathBuf>,
    #[arg(long, global = true)]
    pub posterior: Option<PathBuf>,
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long, global = true)]
    pub priors: Option<PathBuf>,
    #[arg(long, global = true)]
    pub solar_table: Option<PathBuf>,
    #[arg(long, global = true)]
    pub backdoor_instance: Option<PathBuf>,
    #[arg(long, global = true)]
    pub test_data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub timezone: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub start: Option<String>,
    #[arg(long, global = true)]
    pub hours: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub learning_rate: Option<f64>,
    #[arg(long, global = true)]
    pub n_particles: Option<usize>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub init_scale: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub temp_mid: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub humid_temp_threshold: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub wind_cold_threshold: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub wind_hot_threshold: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub active_hours: Option<Vec<u8>>,
    #[arg(long, global = true)]
    pub range_start: Option<String>,
    #[arg(long, global = true)]
    pub range_end: Option<String>,
    #[arg(long, global = true)]
    pub split: Option<String>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub temp_threshold: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub hour_window: Option<Vec<u32>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub month_window: Option<Vec<u32>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub threshold_grid: Option<Vec<f64>>,
    /// sample size for `analyze backdoor`
    #[arg(long = "n", alias = "backdoor-samples", global = true)]
    pub backdoor_samples: Option<usize>,
    #[arg(long, global = true)]
    pub density_points: Option<usize>,
}

macro_rules! take {
    ($cfg:ident, $o:ident, [$($field:ident),*], [$($opt_field:ident),*]) => {
        $( if let Some(v) = $o.$field.clone() { $cfg.$field = v; } )*
        $( if $o.$opt_field.is_some() { $cfg.$opt_field = $o.$opt_field.clone(); } )*
    };
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        take!(
            cfg,
            self,
            [out, timezone, seed, start, hours, steps, learning_rate, n_particles, init_scale, split, folds,
             temp_threshold, hour_window, month_window, threshold_grid, backdoor_samples, density_points],
            [data, load_csv, weather_csv, column_mapping, posterior, params, priors, solar_table, backdoor_instance,
             test_data, batch_size, temp_mid, humid_temp_threshold, wind_cold_threshold, wind_hot_threshold,
             active_hours, range_start, range_end]
        );
    }
}

/// Inputs a command cannot run without.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Data,
    LoadAndWeather,
    Posterior,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

impl RunConfig {
    /// Reads a config file. A manifest is accepted too: its embedded
    /// `config` object is used.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = read_text(path)?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if value.get("config_hash").is_some() {
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &overrides.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        overrides.apply(&mut cfg);
        Ok(cfg)
    }

    /// Every problem at once, so one run reports them all.
    pub fn validate(&self, needs: &[Need]) -> Vec<String> {
        let mut problems = Vec::new();
        let mut path_ok = |key: &str, p: &Option<PathBuf>, required: bool| match p {
            Some(p) if !p.exists() => problems.push(format!("{key}: {} does not exist", p.display())),
            None if required => problems.push(format!("{key} is required for this command")),
            _ => {}
        };
        path_ok("data", &self.data, needs.contains(&Need::Data));
        path_ok("load_csv", &self.load_csv, needs.contains(&Need::LoadAndWeather));
        path_ok("weather_csv", &self.weather_csv, needs.contains(&Need::LoadAndWeather));
        path_ok("posterior", &self.posterior, needs.contains(&Need::Posterior));
        for (key, p) in [
            ("column_mapping", &self.column_mapping),
            ("params", &self.params),
            ("priors", &self.priors),
            ("solar_table", &self.solar_table),
            ("backdoor_instance", &self.backdoor_instance),
            ("test_data", &self.test_data),
        ] {
            path_ok(key, p, false);
        }

        if self.tz().is_err() {
            problems.push(format!("timezone must be `us_central` or `utc`, got `{}`", self.timezone));
        }
        for (key, value) in [("start", Some(&self.start)), ("split", Some(&self.split))]
            .into_iter()
            .chain([("range_start", self.range_start.as_ref()), ("range_end", self.range_end.as_ref())])
        {
            if let Some(v) = value {
                if parse_instant(v).is_err() {
                    problems.push(format!("{key}: `{v}` is not an RFC 3339 timestamp"));
                }
            }
        }
        let svi = self.train_config();
        problems.extend(svi.validate());
        for (key, v) in [
            ("temp_mid", self.temp_mid),
            ("humid_temp_threshold", self.humid_temp_threshold),
            ("wind_cold_threshold", self.wind_cold_threshold),
            ("wind_hot_threshold", self.wind_hot_threshold),
            ("temp_threshold", Some(self.temp_threshold)),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    problems.push(format!("{key} must be finite, got {v}"));
                }
            }
        }
        if let Some(h) = &self.active_hours {
            if h.iter().any(|&x| x > 23) {
                problems.push("active_hours must lie in 0..=23".into());
            }
        }
        if self.hour_window.iter().any(|&h| h > 23) {
            problems.push("hour_window must lie in 0..=23".into());
        }
        if self.month_window.iter().any(|m| !(1..=12).contains(m)) {
            problems.push("month_window must lie in 1..=12".into());
        }
        if self.folds < 2 {
            problems.push(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.threshold_grid.is_empty() || self.threshold_grid.iter().any(|t| !t.is_finite()) {
            problems.push("threshold_grid must be a non-empty list of finite temperatures".into());
        }
        if self.backdoor_samples < 10 {
            problems.push(format!("n (backdoor samples) must be at least 10, got {}", self.backdoor_samples));
        }
        if self.density_points < 3 {
            problems.push(format!("density_points must be at least 3, got {}", self.density_points));
        }
        problems
    }

    pub fn tz(&self) -> Result<TzRule, CliError> {
        match self.timezone.as_str() {
            "us_central" => Ok(TzRule::us_central()),
            "utc" => Ok(TzRule::utc()),
            other => Err(CliError::config(format!("unknown timezone `{other}`"))),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            seed: self.seed,
            n_particles: self.n_particles,
            learning_rate: self.learning_rate,
            init_scale: self.init_scale,
        }
    }

    pub fn fixed_settings(&self) -> Result<FixedSettings, CliError> {
        let mut f = FixedSettings::default();
        if let Some(v) = self.temp_mid {
            f.temp_mid = v;
        }
        if let Some(v) = self.humid_temp_threshold {
            f.humid_temp_threshold = v;
        }
        if let Some(v) = self.wind_cold_threshold {
            f.wind_cold_threshold = v;
        }
        if let Some(v) = self.wind_hot_threshold {
            f.wind_hot_threshold = v;
        }
        if let Some(h) = &self.active_hours {
            f.active_hours = h.clone();
        }
        if let Some(p) = &self.solar_table {
            let table: SolarTable = serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            table.validate().map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            f.solar_table = table;
        }
        Ok(f)
    }

    pub fn priors_spec(&self, fixed: &FixedSettings) -> Result<PriorSpec, CliError> {
        let spec = match &self.priors {
            Some(p) => serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            None => PriorSpec::new(fixed.harmonic_order),
        };
        Ok(spec)
    }

    /// Simulation parameters: the file if given, else the prior means; fixed
    /// settings from the config replace the file's.
    pub fn scm_params(&self) -> Result<ScmParams, CliError> {
        let mut params = match &self.params {
            Some(p) => ScmParams::from_json(&read_text(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            None => ScmParams::prior_means(),
        };
        let fixed = self.fixed_settings()?;
        params.fixed = FixedSettings {
            harmonic_order: params.fixed.harmonic_order,
            ..fixed
        };
        params.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(params)
    }
}

pub fn parse_instant(text: &str) -> Result<DateTime<Utc>, CliError> {
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| CliError::config(format!("`{text}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_without_inputs() {
        assert!(RunConfig::default().validate(&[]).is_empty());
    }

    #[test]
    fn all_violations_reported_together() {
        let cfg = RunConfig {
            learning_rate: -1.0,
            timezone: "mars".into(),
            folds: 1,
            data: Some(PathBuf::from("/nonexistent/data.csv")),
            split: "yesterday".into(),
            ..RunConfig::default()
        };
        let problems = cfg.validate(&[Need::Data, Need::Posterior]);
        assert_eq!(problems.len(), 6, "{problems:#?}");
        assert!(problems.iter().any(|p| p.contains("learning_rate")));
        assert!(problems.iter().any(|p| p.contains("posterior is required")));
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"seed": 3, "steps": 10, "out": "a"}"#).unwrap();
        let o = Overrides {
            config: Some(path),
            seed: Some(7),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!((cfg.seed, cfg.steps, cfg.out), (7, 10, PathBuf::from("a")));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"sead": 3}"#).unwrap();
        assert!(matches!(RunConfig::from_file(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig {
            batch_size: Some(64),
            active_hours: Some(vec![6, 7]),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }
}
