//! The canonical interchange CSV shared by every CLI stage.

use std::io::{Read, Write};
use std::path::Path;

use chrono::SecondsFormat;

use super::{ingest::parse_timestamp, CalendarPoint, DataError, Dataset, HourlyRecord, TzRule, WeatherObservation};

pub const CANONICAL_HEADER: &str = "timestamp_utc,hour,month,temp_f,rh_frac,wind_mph,rad_wm2,demand_mw";

pub fn write_canonical<W: Write>(ds: &Dataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CANONICAL_HEADER}")?;
    for r in ds.iter() {
        let w = &r.weather;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            r.calendar.hour(),
            r.calendar.month(),
            w.temperature,
            w.humidity,
            w.wind_speed,
            w.radiation,
            r.demand
        )?;
    }
    Ok(())
}

pub fn write_canonical_string(ds: &Dataset) -> String {
    let mut buf = Vec::new();
    write_canonical(ds, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("canonical CSV is ASCII")
}

/// Reads the canonical CSV, checking that the stored calendar fields agree
/// with `tz`.
pub fn read_canonical(path: impl AsRef<Path>, tz: &TzRule) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    read_canonical_str(&text, tz)
}

pub fn read_canonical_str(text: &str, tz: &TzRule) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CANONICAL_HEADER => {}
        _ => {
            return Err(DataError::Csv {
                line: 1,
                message: format!("expected header `{CANONICAL_HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(DataError::Csv {
                line: line_no,
                message: format!("expected 8 fields, found {}", cells.len()),
            });
        }
        let parse_err = |col: &str, v: &str| DataError::Parse {
            line: line_no,
            column: col.to_string(),
            value: v.to_string(),
        };
        let num = |k: usize, col: &str| -> Result<f64, DataError> {
            cells[k].trim().parse::<f64>().map_err(|_| parse_err(col, cells[k]))
        };
        let int = |k: usize, col: &str| -> Result<u32, DataError> {
            cells[k].trim().parse::<u32>().map_err(|_| parse_err(col, cells[k]))
        };
        let timestamp = parse_timestamp(cells[0]).ok_or_else(|| parse_err("timestamp_utc", cells[0]))?;
        let stored = CalendarPoint::new(int(1, "hour")?, int(2, "month")?)?;
        let derived = tz.calendar(timestamp);
        if stored != derived {
            return Err(DataError::CalendarMismatch {
                timestamp: cells[0].to_string(),
                stored,
                derived,
            });
        }
        let weather = WeatherObservation {
            temperature: num(3, "temp_f")?,
            humidity: num(4, "rh_frac")?,
            wind_speed: num(5, "wind_mph")?,
            radiation: num(6, "rad_wm2")?,
        };
        weather.validate()?;
        let demand = num(7, "demand_mw")?;
        if !(demand > 0.0) {
            return Err(DataError::NonPositiveDemand {
                line: line_no,
                value: demand,
            });
        }
        records.push(HourlyRecord {
            timestamp,
            calendar: stored,
            weather,
            demand,
        });
    }
    Dataset::new(records)
}
