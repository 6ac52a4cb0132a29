use chrono::{Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::data::TzRule;

/// Coordinates of the representative weather station.
pub const STATION_LATITUDE: f64 = 44.6321;
pub const STATION_LONGITUDE: f64 = -100.2753;

/// Month-averaged local sunrise and sunset, in fractional local hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarTable {
    pub sunrise: [f64; 12],
    pub sunset: [f64; 12],
}

impl Default for SolarTable {
    fn default() -> Self {
        Self::compute(STATION_LATITUDE, STATION_LONGITUDE, &TzRule::us_central(), 2023)
    }
}

impl SolarTable {
    pub fn sunrise(&self, month: u32) -> f64 {
        self.sunrise[month as usize - 1]
    }

    pub fn sunset(&self, month: u32) -> f64 {
        self.sunset[month as usize - 1]
    }

    pub fn validate(&self) -> Result<(), String> {
        for m in 0..12 {
            let (r, s) = (self.sunrise[m], self.sunset[m]);
            if !(0.0 <= r && r < s && s <= 24.0) {
                return Err(format!("month {}: sunrise {r} / sunset {s}", m + 1));
            }
        }
        Ok(())
    }

    /// Averages daily sunrise/sunset over each month of `year`, using the
    /// solar declination and equation-of-time approximations and the
    /// standard −0.833° horizon for refraction and the solar disc.
    pub fn compute(lat_deg: f64, lon_deg: f64, tz: &TzRule, year: i32) -> Self {
        let mut sums = [[0.0f64; 2]; 12];
        let mut counts = [0usize; 12];
        let mut day = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
        let days_in_year = if NaiveDate::from_ymd_opt(year, 12, 31).unwrap().ordinal() == 366 {
            366.0
        } else {
            365.0
        };
        while day.year() == year {
            let noon = Utc.from_utc_datetime(&day.and_hms_opt(12, 0, 0).unwrap());
            let offset = tz.offset_hours(noon) as f64;
            let (rise_utc, set_utc) = sun_times_utc(lat_deg, lon_deg, day.ordinal() as f64, days_in_year);
            let m = day.month0() as usize;
            sums[m][0] += (rise_utc + offset).rem_euclid(24.0);
            sums[m][1] += (set_utc + offset).rem_euclid(24.0);
            counts[m] += 1;
            day = day.succ_opt().unwrap();
        }
        let mut table = SolarTable {
            sunrise: [0.0; 12],
            sunset: [0.0; 12],
        };
        for m in 0..12 {
            table.sunrise[m] = sums[m][0] / counts[m] as f64;
            table.sunset[m] = sums[m][1] / counts[m] as f64;
        }
        table
    }
}

/// Sunrise and sunset in UTC hours for day-of-year `doy`.
fn sun_times_utc(lat_deg: f64, lon_deg: f64, doy: f64, days_in_year: f64) -> (f64, f64) {
    let g = 2.0 * std::f64::consts::PI / days_in_year * (doy - 1.0);
    let eqtime = 229.18
        * (0.000075 + 0.001868 * g.cos() - 0.032077 * g.sin() - 0.014615 * (2.0 * g).cos()
            - 0.040849 * (2.0 * g).sin());
    let decl = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin();
    let lat = lat_deg.to_radians();
    let cos_ha = (90.833f64.to_radians().cos() / (lat.cos() * decl.cos()) - lat.tan() * decl.tan()).clamp(-1.0, 1.0);
    let ha = cos_ha.acos().to_degrees();
    let rise_min = 720.0 - 4.0 * (lon_deg + ha) - eqtime;
    let set_min = 720.0 - 4.0 * (lon_deg - ha) - eqtime;
    (rise_min / 60.0, set_min / 60.0)
}
