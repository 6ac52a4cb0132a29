use chrono::{DateTime, Datelike, Duration, NaiveDate, TimeZone, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};

use super::CalendarPoint;

/// A UTC interval during which daylight saving is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DstPeriod {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DstSchedule {
    None,
    /// Second Sunday of March 02:00 local standard time to first Sunday of
    /// November 02:00 local daylight time (US rules since 2007).
    UnitedStates,
    Table(Vec<DstPeriod>),
}

/// Fixed standard offset plus a daylight-saving schedule; maps UTC instants
/// to local civil hour and month.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TzRule {
    pub std_offset_hours: i32,
    #[serde(default = "one")]
    pub dst_shift_hours: i32,
    pub dst: DstSchedule,
}

fn one() -> i32 {
    1
}

impl Default for TzRule {
    fn default() -> Self {
        Self::us_central()
    }
}

impl TzRule {
    pub fn us_central() -> Self {
        Self {
            std_offset_hours: -6,
            dst_shift_hours: 1,
            dst: DstSchedule::UnitedStates,
        }
    }

    pub fn utc() -> Self {
        Self {
            std_offset_hours: 0,
            dst_shift_hours: 0,
            dst: DstSchedule::None,
        }
    }

    pub fn is_dst(&self, ts: DateTime<Utc>) -> bool {
        match &self.dst {
            DstSchedule::None => false,
            DstSchedule::Table(periods) => periods.iter().any(|p| ts >= p.start && ts < p.end),
            DstSchedule::UnitedStates => {
                let year = ts.year();
                let start_day = nth_weekday(year, 3, Weekday::Sun, 2);
                let end_day = nth_weekday(year, 11, Weekday::Sun, 1);
                let start = utc_at(start_day, 2 - self.std_offset_hours);
                let end = utc_at(end_day, 2 - self.std_offset_hours - self.dst_shift_hours);
                ts >= start && ts < end
            }
        }
    }

    pub fn offset_hours(&self, ts: DateTime<Utc>) -> i32 {
        self.std_offset_hours + if self.is_dst(ts) { self.dst_shift_hours } else { 0 }
    }

    pub fn local(&self, ts: DateTime<Utc>) -> chrono::NaiveDateTime {
        ts.naive_utc() + Duration::hours(self.offset_hours(ts) as i64)
    }

    pub fn calendar(&self, ts: DateTime<Utc>) -> CalendarPoint {
        let local = self.local(ts);
        CalendarPoint::new(local.hour(), local.month()).expect("chrono yields valid hour and month")
    }
}

fn nth_weekday(year: i32, month: u32, wd: Weekday, n: u32) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, wd, n as u8).expect("every month has a first and second Sunday")
}

fn utc_at(day: NaiveDate, hour: i32) -> DateTime<Utc> {
    let midnight = Utc.from_utc_datetime(&day.and_hms_opt(0, 0, 0).unwrap());
    midnight + Duration::hours(hour as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    #[test]
    fn central_standard_and_daylight() {
        let tz = TzRule::us_central();
        // 2024-01-15 18:00 UTC = noon CST
        assert_eq!(tz.calendar(at(2024, 1, 15, 18)), CalendarPoint::new(12, 1).unwrap());
        // 2024-07-15 17:00 UTC = noon CDT
        assert_eq!(tz.calendar(at(2024, 7, 15, 17)), CalendarPoint::new(12, 7).unwrap());
        // month rolls back across UTC midnight
        assert_eq!(tz.calendar(at(2024, 8, 1, 2)), CalendarPoint::new(21, 7).unwrap());
    }

    #[test]
    fn us_transitions_2024() {
        let tz = TzRule::us_central();
        // DST starts 2024-03-10 08:00 UTC, ends 2024-11-03 07:00 UTC
        assert!(!tz.is_dst(at(2024, 3, 10, 7)));
        assert!(tz.is_dst(at(2024, 3, 10, 8)));
        assert!(tz.is_dst(at(2024, 11, 3, 6)));
        assert!(!tz.is_dst(at(2024, 11, 3, 7)));
    }

    #[test]
    fn explicit_table() {
        let tz = TzRule {
            std_offset_hours: 1,
            dst_shift_hours: 1,
            dst: DstSchedule::Table(vec![DstPeriod {
                start: at(2024, 3, 31, 1),
                end: at(2024, 10, 27, 1),
            }]),
        };
        assert_eq!(tz.offset_hours(at(2024, 6, 1, 0)), 2);
        assert_eq!(tz.offset_hours(at(2024, 12, 1, 0)), 1);
    }
}
