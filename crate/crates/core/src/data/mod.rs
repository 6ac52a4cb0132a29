//! Hourly load and weather records.
//!
//! Everything downstream consumes a [`Dataset`]: strictly increasing UTC
//! hours, each joined with its local calendar position, a single-station
//! weather observation and the balancing-authority demand.

mod canonical;
mod ingest;
mod tz;
mod units;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use canonical::{
    read_canonical, read_canonical_str, write_canonical, write_canonical_string, CANONICAL_HEADER,
};
pub use ingest::{
    ingest_load_csv, ingest_weather_csv, join_hourly, ColumnMapping, IngestMeta, JoinMeta, LoadColumns, LoadRow,
    LoadSeries, WeatherColumns, WeatherTable,
};
pub use tz::{DstPeriod, DstSchedule, TzRule};
pub use units::{convert_units, kmh_to_mph};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("line {line}: cannot parse {column} value `{value}`")]
    Parse {
        line: usize,
        column: String,
        value: String,
    },
    #[error("row {}: relative humidity {value}% outside [0, 100]", fmt_line(*line))]
    HumidityOutOfRange { line: Option<usize>, value: f64 },
    #[error("line {line}: {field} must be non-negative, got {value}")]
    Negative {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: demand must be positive, got {value}")]
    NonPositiveDemand { line: usize, value: f64 },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(String),
    #[error("load and weather share no hours")]
    EmptyJoin,
    #[error("invalid calendar point hour={hour} month={month}")]
    InvalidCalendar { hour: u32, month: u32 },
    #[error("record {index}: timestamps must be strictly increasing")]
    NotIncreasing { index: usize },
    #[error("{timestamp}: stored calendar {stored} disagrees with derived {derived}")]
    CalendarMismatch {
        timestamp: String,
        stored: CalendarPoint,
        derived: CalendarPoint,
    },
    #[error("invalid weather observation: {0}")]
    InvalidWeather(String),
    #[error("column mapping: {0}")]
    Mapping(#[from] serde_json::Error),
}

fn fmt_line(line: Option<usize>) -> String {
    line.map_or_else(|| "?".to_string(), |l| l.to_string())
}

/// Local hour of day and month of year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CalendarPoint {
    hour: u8,
    month: u8,
}

impl CalendarPoint {
    pub fn new(hour: u32, month: u32) -> Result<Self, DataError> {
        if hour > 23 || !(1..=12).contains(&month) {
            return Err(DataError::InvalidCalendar { hour, month });
        }
        Ok(Self {
            hour: hour as u8,
            month: month as u8,
        })
    }

    pub fn hour(self) -> u32 {
        self.hour as u32
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }
}

impl fmt::Display for CalendarPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(hour {}, month {})", self.hour, self.month)
    }
}

/// Weather at the representative station, already in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    /// °F
    pub temperature: f64,
    /// relative humidity as a fraction in [0, 1]
    pub humidity: f64,
    /// mph
    pub wind_speed: f64,
    /// shortwave radiation, W/m²
    pub radiation: f64,
}

impl WeatherObservation {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidWeather(m));
        if !self.temperature.is_finite() {
            return bad(format!("temperature {}", self.temperature));
        }
        if !(0.0..=1.0).contains(&self.humidity) {
            return bad(format!("humidity {} outside [0, 1]", self.humidity));
        }
        if !(self.wind_speed >= 0.0) {
            return bad(format!("wind speed {}", self.wind_speed));
        }
        if !(self.radiation >= 0.0) {
            return bad(format!("radiation {}", self.radiation));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    pub timestamp: DateTime<Utc>,
    pub calendar: CalendarPoint,
    pub weather: WeatherObservation,
    /// MW
    pub demand: f64,
}

/// Records in strictly increasing timestamp order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HourlyRecord>", into = "Vec<HourlyRecord>")]
pub struct Dataset {
    records: Vec<HourlyRecord>,
}

impl TryFrom<Vec<HourlyRecord>> for Dataset {
    type Error = DataError;
    fn try_from(records: Vec<HourlyRecord>) -> Result<Self, DataError> {
        Self::new(records)
    }
}

impl From<Dataset> for Vec<HourlyRecord> {
    fn from(ds: Dataset) -> Self {
        ds.records
    }
}

impl Dataset {
    pub fn new(records: Vec<HourlyRecord>) -> Result<Self, DataError> {
        for (i, w) in records.windows(2).enumerate() {
            if w[1].timestamp <= w[0].timestamp {
                return Err(DataError::NotIncreasing { index: i + 1 });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[HourlyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, HourlyRecord> {
        self.records.iter()
    }

    /// Order-preserving subset; the result is a valid dataset by construction.
    pub fn filter(&self, mut keep: impl FnMut(&HourlyRecord) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).copied().collect(),
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            records: self.records[range].to_vec(),
        }
    }

    /// All records except those in `range`.
    pub fn without(&self, range: std::ops::Range<usize>) -> Dataset {
        let mut records = self.records[..range.start].to_vec();
        records.extend_from_slice(&self.records[range.end..]);
        Dataset { records }
    }

    pub fn demand(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.demand).collect()
    }

    pub fn month(&self, month: u32) -> Dataset {
        self.filter(|r| r.calendar.month() == month)
    }
}

/// Records with `start ≤ timestamp < end`, order preserved. Empty when
/// `start ≥ end`.
pub fn split_by_range(ds: &Dataset, start: DateTime<Utc>, end: DateTime<Utc>) -> Dataset {
    ds.filter(|r| r.timestamp >= start && r.timestamp < end)
}
