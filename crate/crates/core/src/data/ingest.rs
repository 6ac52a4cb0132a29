//! Raw CSV ingestion for balancing-authority load and station weather.
//!
//! Both readers skip any preamble before the header row (Open-Meteo exports
//! start with a location block), match columns by name or by `name (unit)`,
//! truncate timestamps to the UTC hour, sort out-of-order rows (counting
//! them) and reject duplicate hours.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, DurationRound, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use super::{convert_units, CalendarPoint, DataError, Dataset, HourlyRecord, TzRule, WeatherObservation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadColumns {
    pub timestamp: String,
    pub demand: String,
}

impl Default for LoadColumns {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            demand: "MW".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherColumns {
    pub time: String,
    /// °C
    pub temperature: String,
    /// %
    pub humidity: String,
    /// km/h
    pub wind_speed: String,
    /// W/m²
    pub radiation: String,
}

impl Default for WeatherColumns {
    fn default() -> Self {
        Self {
            time: "time".into(),
            temperature: "temperature_2m".into(),
            humidity: "relative_humidity_2m".into(),
            wind_speed: "wind_speed_10m".into(),
            radiation: "shortwave_radiation".into(),
        }
    }
}

/// Column names of the raw inputs; loadable from a JSON mapping file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub load: LoadColumns,
    pub weather: WeatherColumns,
}

impl ColumnMapping {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = read(path.as_ref())?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Row counts and warnings collected while ingesting one file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestMeta {
    pub file: String,
    pub rows_read: usize,
    /// rows that arrived earlier than their predecessor and were re-sorted
    pub out_of_order: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinMeta {
    pub joined: usize,
    pub dropped_load_only: usize,
    pub dropped_weather_only: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRow {
    pub timestamp: DateTime<Utc>,
    pub calendar: CalendarPoint,
    pub demand: f64,
}

/// Demand-only series, strictly increasing in time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSeries {
    pub rows: Vec<LoadRow>,
}

impl LoadSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Weather observations keyed by UTC hour.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeatherTable {
    pub rows: BTreeMap<DateTime<Utc>, WeatherObservation>,
}

impl WeatherTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean temperature over observations whose UTC month is `month`.
    pub fn mean_temperature(&self, month: u32) -> Option<f64> {
        use chrono::Datelike;
        let temps: Vec<f64> = self
            .rows
            .iter()
            .filter(|(ts, _)| ts.month() == month)
            .map(|(_, w)| w.temperature)
            .collect();
        (!temps.is_empty()).then(|| temps.iter().sum::<f64>() / temps.len() as f64)
    }
}

pub fn ingest_load_csv(
    path: impl AsRef<Path>,
    tz: &TzRule,
    columns: &LoadColumns,
) -> Result<(LoadSeries, IngestMeta), DataError> {
    let path = path.as_ref();
    let text = read(path)?;
    let table = RawTable::parse(&text, path, &columns.timestamp, &[&columns.demand])?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let demand = row.number(0, &columns.demand)?;
        if !(demand > 0.0) {
            return Err(DataError::NonPositiveDemand {
                line: row.line,
                value: demand,
            });
        }
        rows.push(LoadRow {
            timestamp: row.timestamp,
            calendar: tz.calendar(row.timestamp),
            demand,
        });
    }
    let out_of_order = sort_and_dedup(&mut rows, |r| r.timestamp)?;
    let meta = IngestMeta {
        file: path.display().to_string(),
        rows_read: table.rows.len(),
        out_of_order,
    };
    Ok((LoadSeries { rows }, meta))
}

pub fn ingest_weather_csv(
    path: impl AsRef<Path>,
    columns: &WeatherColumns,
) -> Result<(WeatherTable, IngestMeta), DataError> {
    let path = path.as_ref();
    let text = read(path)?;
    let names = [
        columns.temperature.as_str(),
        columns.humidity.as_str(),
        columns.wind_speed.as_str(),
        columns.radiation.as_str(),
    ];
    let table = RawTable::parse(&text, path, &columns.time, &names)?;
    let mut obs = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let temp_c = row.number(0, names[0])?;
        let rh_pct = row.number(1, names[1])?;
        let wind_kmh = row.number(2, names[2])?;
        let rad = row.number(3, names[3])?;
        let (temperature, wind_speed, humidity) = convert_units(temp_c, wind_kmh, rh_pct).map_err(|e| match e {
            DataError::HumidityOutOfRange { value, .. } => DataError::HumidityOutOfRange {
                line: Some(row.line),
                value,
            },
            other => other,
        })?;
        for (field, value) in [("wind speed", wind_speed), ("radiation", rad)] {
            if value < 0.0 {
                return Err(DataError::Negative {
                    line: row.line,
                    field,
                    value,
                });
            }
        }
        obs.push((
            row.timestamp,
            WeatherObservation {
                temperature,
                humidity,
                wind_speed,
                radiation: rad,
            },
        ));
    }
    let out_of_order = sort_and_dedup(&mut obs, |r| r.0)?;
    let meta = IngestMeta {
        file: path.display().to_string(),
        rows_read: table.rows.len(),
        out_of_order,
    };
    Ok((
        WeatherTable {
            rows: obs.into_iter().collect(),
        },
        meta,
    ))
}

/// Inner join on the UTC hour. Unmatched hours are dropped and counted.
pub fn join_hourly(load: &LoadSeries, weather: &WeatherTable) -> Result<(Dataset, JoinMeta), DataError> {
    let mut records = Vec::with_capacity(load.len().min(weather.len()));
    for row in &load.rows {
        if let Some(w) = weather.rows.get(&row.timestamp) {
            records.push(HourlyRecord {
                timestamp: row.timestamp,
                calendar: row.calendar,
                weather: *w,
                demand: row.demand,
            });
        }
    }
    if records.is_empty() {
        return Err(DataError::EmptyJoin);
    }
    let meta = JoinMeta {
        joined: records.len(),
        dropped_load_only: load.len() - records.len(),
        dropped_weather_only: weather.len() - records.len(),
    };
    Ok((Dataset::new(records)?, meta))
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Sorts by key if needed, returning how many rows arrived out of order.
fn sort_and_dedup<T>(rows: &mut [T], key: impl Fn(&T) -> DateTime<Utc>) -> Result<usize, DataError> {
    let out_of_order = rows.windows(2).filter(|w| key(&w[1]) < key(&w[0])).count();
    if out_of_order > 0 {
        rows.sort_by_key(|r| key(r));
    }
    if let Some(w) = rows.windows(2).find(|w| key(&w[0]) == key(&w[1])) {
        return Err(DataError::DuplicateTimestamp(key(&w[0]).to_rfc3339()));
    }
    Ok(out_of_order)
}

struct RawRow {
    line: usize,
    timestamp: DateTime<Utc>,
    fields: Vec<String>,
}

impl RawRow {
    fn number(&self, i: usize, column: &str) -> Result<f64, DataError> {
        let raw = self.fields[i].trim();
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| DataError::Parse {
                line: self.line,
                column: column.to_string(),
                value: raw.to_string(),
            })
    }
}

struct RawTable {
    rows: Vec<RawRow>,
}

fn header_matches(cell: &str, name: &str) -> bool {
    let cell = cell.trim().trim_start_matches('\u{feff}');
    cell == name || cell.strip_prefix(name).is_some_and(|rest| rest.starts_with(" ("))
}

impl RawTable {
    fn parse(text: &str, path: &Path, time_col: &str, value_cols: &[&str]) -> Result<Self, DataError> {
        let file = path.display().to_string();
        let header_idx = text
            .lines()
            .position(|l| l.split(',').any(|c| header_matches(c, time_col)))
            .ok_or_else(|| DataError::MissingColumn {
                file: file.clone(),
                column: time_col.to_string(),
            })?;
        let offset: usize = text.lines().take(header_idx).map(|l| l.len() + 1).sum();
        let body = &text[offset.min(text.len())..];

        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(body.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| DataError::Csv {
                line: header_idx + 1,
                message: e.to_string(),
            })?
            .clone();
        let find = |name: &str| {
            header
                .iter()
                .position(|c| header_matches(c, name))
                .ok_or_else(|| DataError::MissingColumn {
                    file: file.clone(),
                    column: name.to_string(),
                })
        };
        let t_idx = find(time_col)?;
        let v_idx = value_cols.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| DataError::Csv {
                line: header_idx + 1 + e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = header_idx + rec.position().map_or(0, |p| p.line() as usize);
            if rec.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            let cell = |i: usize| rec.get(i).unwrap_or("").to_string();
            let raw_ts = cell(t_idx);
            let timestamp = parse_timestamp(&raw_ts).ok_or_else(|| DataError::Parse {
                line,
                column: time_col.to_string(),
                value: raw_ts.clone(),
            })?;
            rows.push(RawRow {
                line,
                timestamp,
                fields: v_idx.iter().map(|&i| cell(i)).collect(),
            });
        }
        Ok(Self { rows })
    }
}

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
    "%m/%d/%Y %I:%M:%S %p",
];

/// RFC 3339 with offset, or one of the common naive layouts read as UTC;
/// truncated to the hour.
pub(crate) fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    let naive = raw.strip_suffix('Z').unwrap_or(raw);
    let ts = DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            NAIVE_FORMATS
                .iter()
                .find_map(|f| NaiveDateTime::parse_from_str(naive, f).ok())
                .map(|n| n.and_utc())
        })?;
    ts.duration_trunc(TimeDelta::hours(1)).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn timestamp_layouts() {
        let want = "2024-01-05T13:00:00+00:00";
        for raw in [
            "2024-01-05T13:00",
            "2024-01-05T13:00:00Z",
            "2024-01-05 13:45:10",
            "01/05/2024 13:00:00",
            "2024-01-05T07:00:00-06:00",
            "01/05/2024 01:00:00 PM",
        ] {
            assert_eq!(parse_timestamp(raw).unwrap().to_rfc3339(), want, "{raw}");
        }
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn three_load_rows() {
        let f = write_tmp("timestamp,MW\n2024-01-01T00:00Z,3000\n2024-01-01T01:00Z,3100.5\n2024-01-01T02:00Z,2990\n");
        let (s, meta) = ingest_load_csv(f.path(), &TzRule::us_central(), &LoadColumns::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(meta.rows_read, 3);
        assert_eq!(meta.out_of_order, 0);
        // 00:00 UTC on Jan 1 is 18:00 on Dec 31 in Central time
        assert_eq!(s.rows[0].calendar, CalendarPoint::new(18, 12).unwrap());
    }

    #[test]
    fn duplicate_hour_named() {
        let f = write_tmp("timestamp,MW\n2024-01-01T00:00Z,3000\n2024-01-01T00:00Z,3100\n");
        let err = ingest_load_csv(f.path(), &TzRule::utc(), &LoadColumns::default()).unwrap_err();
        match err {
            DataError::DuplicateTimestamp(h) => assert!(h.starts_with("2024-01-01T00:00:00")),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unsorted_rows_counted() {
        let f = write_tmp("timestamp,MW\n2024-01-01T02:00Z,1\n2024-01-01T00:00Z,2\n2024-01-01T01:00Z,3\n");
        let (s, meta) = ingest_load_csv(f.path(), &TzRule::utc(), &LoadColumns::default()).unwrap();
        assert_eq!(meta.out_of_order, 1);
        assert!(s.rows.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert_eq!(s.rows[0].demand, 2.0);
    }

    #[test]
    fn bad_row_reports_line() {
        let f = write_tmp("timestamp,MW\n2024-01-01T00:00Z,3000\n2024-01-01T01:00Z,abc\n");
        let err = ingest_load_csv(f.path(), &TzRule::utc(), &LoadColumns::default()).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err:?}");
    }

    const OPEN_METEO: &str = "latitude,longitude,elevation\n44.6321,-100.2753,600\n\n\
time,temperature_2m (°C),relative_humidity_2m (%),wind_speed_10m (km/h),shortwave_radiation (W/m²)\n\
2024-07-01T00:00,30.0,40,16.09344,500\n\
2024-07-01T01:00,25.0,55,0,100\n\
2024-07-01T02:00,20.0,70,8,0\n";

    #[test]
    fn weather_with_preamble_and_units() {
        let f = write_tmp(OPEN_METEO);
        let (t, meta) = ingest_weather_csv(f.path(), &WeatherColumns::default()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(meta.rows_read, 3);
        let first = t.rows.values().next().unwrap();
        assert_eq!(first.temperature, 86.0);
        assert_eq!(first.humidity, 0.4);
        assert!((first.wind_speed - 10.0).abs() < 1e-12);
        assert_eq!(first.radiation, 500.0);
    }

    #[test]
    fn weather_humidity_over_100() {
        let f = write_tmp("time,temperature_2m,relative_humidity_2m,wind_speed_10m,shortwave_radiation\n2024-07-01T00:00,30,101,5,0\n");
        let err = ingest_weather_csv(f.path(), &WeatherColumns::default()).unwrap_err();
        assert!(matches!(err, DataError::HumidityOutOfRange { line: Some(2), value } if value == 101.0), "{err:?}");
    }

    #[test]
    fn custom_mapping() {
        let f = write_tmp("GMT Time,Load\n2024-01-01T00:00Z,3000\n");
        let json = r#"{"load": {"timestamp": "GMT Time", "demand": "Load"}}"#;
        let m: ColumnMapping = serde_json::from_str(json).unwrap();
        assert_eq!(m.weather, WeatherColumns::default());
        let (s, _) = ingest_load_csv(f.path(), &TzRule::utc(), &m.load).unwrap();
        assert_eq!(s.len(), 1);
    }

    fn series(hours: impl Iterator<Item = i64>) -> (LoadSeries, WeatherTable) {
        let t0 = "2024-01-01T00:00:00Z".parse::<DateTime<Utc>>().unwrap();
        let tz = TzRule::utc();
        let mut load = LoadSeries::default();
        let mut weather = WeatherTable::default();
        for h in hours {
            let ts = t0 + TimeDelta::hours(h);
            load.rows.push(LoadRow {
                timestamp: ts,
                calendar: tz.calendar(ts),
                demand: 1000.0,
            });
            weather.rows.insert(
                ts,
                WeatherObservation {
                    temperature: 50.0,
                    humidity: 0.5,
                    wind_speed: 3.0,
                    radiation: 0.0,
                },
            );
        }
        (load, weather)
    }

    #[test]
    fn join_identical_keys() {
        let (l, w) = series(0..100);
        let (ds, meta) = join_hourly(&l, &w).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(meta.dropped_load_only + meta.dropped_weather_only, 0);
    }

    #[test]
    fn join_year_missing_a_day() {
        let (l, mut w) = series(0..8760);
        let t0 = l.rows[0].timestamp;
        for h in 4000..4024 {
            w.rows.remove(&(t0 + TimeDelta::hours(h)));
        }
        let (ds, meta) = join_hourly(&l, &w).unwrap();
        assert_eq!(ds.len(), 8736);
        assert_eq!(meta.dropped_load_only, 24);
        assert_eq!(meta.dropped_weather_only, 0);
    }

    #[test]
    fn join_disjoint_errors() {
        let (l, _) = series(0..10);
        let (_, w) = series(20..30);
        assert!(matches!(join_hourly(&l, &w), Err(DataError::EmptyJoin)));
    }

    proptest::proptest! {
        #[test]
        fn join_keys_are_intersection(a in proptest::collection::btree_set(0i64..200, 1..120),
                                      b in proptest::collection::btree_set(0i64..200, 1..120)) {
            let (l, _) = series(a.iter().copied());
            let (_, w) = series(b.iter().copied());
            let inter: Vec<i64> = a.intersection(&b).copied().collect();
            match join_hourly(&l, &w) {
                Ok((ds, meta)) => {
                    let t0 = "2024-01-01T00:00:00Z".parse::<DateTime<Utc>>().unwrap();
                    let got: Vec<i64> = ds.iter().map(|r| (r.timestamp - t0).num_hours()).collect();
                    proptest::prop_assert_eq!(got, inter.clone());
                    proptest::prop_assert_eq!(meta.dropped_load_only, a.len() - inter.len());
                    proptest::prop_assert_eq!(meta.dropped_weather_only, b.len() - inter.len());
                }
                Err(DataError::EmptyJoin) => proptest::prop_assert!(inter.is_empty()),
                Err(e) => proptest::prop_assert!(false, "{}", e),
            }
        }
    }
}
