//! Geometric sunrise/sunset computation and daylight partition boundaries.
//!
//! Follows the NOAA solar-equations sheet: fractional-year Fourier series
//! for the equation of time and solar declination, hour angle at the
//! standard zenith of 90.833 degrees (refraction plus solar radius).

use chrono::{Datelike, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::TzRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolarFlag {
    Normal,
    /// Sun never sets.
    PolarDay,
    /// Sun never rises.
    PolarNight,
}

/// Sunrise and sunset in local wall-clock hours for one date and place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SunTimes {
    pub date: NaiveDate,
    pub lat: f64,
    pub lon: f64,
    pub sunrise: Option<f64>,
    pub sunset: Option<f64>,
    pub flag: SolarFlag,
}

const ZENITH_DEG: f64 = 90.833;

fn fractional_year(date: NaiveDate) -> f64 {
    let days_in_year = if date.leap_year() { 366.0 } else { 365.0 };
    2.0 * std::f64::consts::PI * (date.ordinal0() as f64) / days_in_year
}

/// Equation of time in minutes.
fn equation_of_time(gamma: f64) -> f64 {
    229.18
        * (0.000075 + 0.001868 * gamma.cos()
            - 0.032077 * gamma.sin()
            - 0.014615 * (2.0 * gamma).cos()
            - 0.040849 * (2.0 * gamma).sin())
}

/// Solar declination in radians.
fn declination(gamma: f64) -> f64 {
    0.006918 - 0.399912 * gamma.cos() + 0.070257 * gamma.sin()
        - 0.006758 * (2.0 * gamma).cos()
        + 0.000907 * (2.0 * gamma).sin()
        - 0.002697 * (3.0 * gamma).cos()
        + 0.00148 * (3.0 * gamma).sin()
}

/// Sunrise/sunset for `date` at (`lat`, `lon`), localized through `tz`.
pub fn sun_times(lat: f64, lon: f64, date: NaiveDate, tz: TzRule) -> SunTimes {
    assert!((-90.0..=90.0).contains(&lat), "latitude out of range");
    assert!((-180.0..=180.0).contains(&lon), "longitude out of range");

    let gamma = fractional_year(date);
    let eqtime = equation_of_time(gamma);
    let decl = declination(gamma);
    let lat_rad = lat.to_radians();

    let cos_ha = ZENITH_DEG.to_radians().cos() / (lat_rad.cos() * decl.cos())
        - lat_rad.tan() * decl.tan();
    if cos_ha > 1.0 {
        return SunTimes { date, lat, lon, sunrise: None, sunset: None, flag: SolarFlag::PolarNight };
    }
    if cos_ha < -1.0 {
        return SunTimes { date, lat, lon, sunrise: None, sunset: None, flag: SolarFlag::PolarDay };
    }

    let ha_deg = cos_ha.acos().to_degrees();
    let snoon = 720.0 - 4.0 * lon - eqtime; // minutes past UTC midnight
    let localize = |utc_minutes: f64| -> f64 {
        let instant = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap())
            + chrono::Duration::seconds((utc_minutes * 60.0).round() as i64);
        let (offset, _) = tz.offset_at(instant);
        ((utc_minutes + offset as f64 / 60.0) / 60.0).rem_euclid(24.0)
    };

    SunTimes {
        date,
        lat,
        lon,
        sunrise: Some(localize(snoon - 4.0 * ha_deg)),
        sunset: Some(localize(snoon + 4.0 * ha_deg)),
        flag: SolarFlag::Normal,
    }
}

/// Daylight duration in hours, when the sun rises and sets.
pub fn day_length(times: &SunTimes) -> Option<f64> {
    match (times.sunrise, times.sunset) {
        (Some(rise), Some(set)) => Some((set - rise).rem_euclid(24.0)),
        _ => None,
    }
}

/// Rounds an hour value to the nearest quarter hour.
pub fn round_quarter(hour: f64) -> f64 {
    (hour * 4.0).round() / 4.0
}

/// `date,lat,lon,sunrise,sunset,flag` CSV rows for a series of sun times.
pub fn sun_times_csv(rows: &[SunTimes]) -> String {
    let mut out = String::from("date,lat,lon,sunrise,sunset,flag\n");
    for t in rows {
        let opt = |v: Option<f64>| v.map(|h| format!("{h:.4}")).unwrap_or_default();
        let flag = match t.flag {
            SolarFlag::Normal => "normal",
            SolarFlag::PolarDay => "polar_day",
            SolarFlag::PolarNight => "polar_night",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{flag}\n",
            t.date,
            t.lat,
            t.lon,
            opt(t.sunrise),
            opt(t.sunset)
        ));
    }
    out
}

/// First-of-month sunrise/sunset rounded to the nearest quarter hour.
pub fn monthly_boundaries(
    lat: f64,
    lon: f64,
    year: i32,
    month: u32,
    tz: TzRule,
) -> (Option<f64>, Option<f64>) {
    let first = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
    let times = sun_times(lat, lon, first, tz);
    (times.sunrise.map(round_quarter), times.sunset.map(round_quarter))
}

/// Clock-time day/night border values for a span of months: the
/// first-of-month sunrise/sunset times averaged and rounded to the
/// nearest quarter hour.
pub fn span_boundaries(
    lat: f64,
    lon: f64,
    months: &[(i32, u32)],
    tz: TzRule,
) -> Option<(f64, f64)> {
    let mut rises = Vec::new();
    let mut sets = Vec::new();
    for &(year, month) in months {
        let first = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
        let times = sun_times(lat, lon, first, tz);
        rises.push(times.sunrise?);
        sets.push(times.sunset?);
    }
    if rises.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Some((round_quarter(mean(&rises)), round_quarter(mean(&sets))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn equator_equinox_half_day() {
        let times = sun_times(0.0, 0.0, date(2021, 3, 20), TzRule::Utc);
        let len = day_length(&times).unwrap();
        assert!((len - 12.0).abs() < 10.0 / 60.0, "day length {len}");
        let rise = times.sunrise.unwrap();
        assert!((rise - 6.0).abs() < 0.3, "sunrise {rise}");
    }

    #[test]
    fn rome_summer_solstice_sanity() {
        // Rome, 2020-06-21 (CEST): sunrise ~05:34, sunset ~20:49
        let times = sun_times(41.9, 12.5, date(2020, 6, 21), TzRule::CetCest);
        let rise = times.sunrise.unwrap();
        let set = times.sunset.unwrap();
        assert!((rise - (5.0 + 34.0 / 60.0)).abs() < 10.0 / 60.0, "sunrise {rise}");
        assert!((set - (20.0 + 49.0 / 60.0)).abs() < 10.0 / 60.0, "sunset {set}");
    }

    #[test]
    fn polar_flags() {
        assert_eq!(sun_times(80.0, 0.0, date(2021, 12, 21), TzRule::Utc).flag, SolarFlag::PolarNight);
        assert_eq!(sun_times(80.0, 0.0, date(2021, 6, 21), TzRule::Utc).flag, SolarFlag::PolarDay);
        assert_eq!(sun_times(45.0, 0.0, date(2021, 6, 21), TzRule::Utc).flag, SolarFlag::Normal);
    }

    #[test]
    fn northern_summer_longer_than_winter() {
        for lat in [20.0, 42.0, 60.0] {
            let summer = day_length(&sun_times(lat, 10.0, date(2021, 6, 21), TzRule::Utc)).unwrap();
            let winter = day_length(&sun_times(lat, 10.0, date(2021, 12, 21), TzRule::Utc)).unwrap();
            assert!(summer > winter, "lat {lat}: {summer} vs {winter}");
        }
    }

    #[test]
    fn sunrise_continuity_at_moderate_latitudes() {
        for lat in [0.0, 30.0, 55.0] {
            let mut prev: Option<f64> = None;
            let mut day = date(2021, 1, 1);
            while day.year() == 2021 {
                let rise = sun_times(lat, 5.0, day, TzRule::Utc).sunrise.unwrap();
                if let Some(p) = prev {
                    let jump = (rise - p).abs();
                    assert!(jump < 5.0 / 60.0, "lat {lat} {day}: jump {jump}");
                }
                prev = Some(rise);
                day = day.succ_opt().unwrap();
            }
        }
    }

    #[test]
    fn localizing_is_offset_shift() {
        let day = date(2020, 6, 1);
        let utc = sun_times(41.9, 12.5, day, TzRule::Utc);
        let local = sun_times(41.9, 12.5, day, TzRule::CetCest);
        // June is CEST: +2 h
        let shifted = (utc.sunrise.unwrap() + 2.0).rem_euclid(24.0);
        assert!((local.sunrise.unwrap() - shifted).abs() < 1e-9);
    }

    #[test]
    fn quarter_rounding() {
        // 06:37 is nearer 06:30; 06:38 is nearer 06:45
        assert_eq!(round_quarter(6.0 + 37.0 / 60.0), 6.5);
        assert_eq!(round_quarter(6.0 + 38.0 / 60.0), 6.75);
        assert_eq!(round_quarter(18.7), 18.75);
    }

    #[test]
    fn csv_rows_cover_polar_flags() {
        let rows = vec![
            sun_times(41.9, 12.5, date(2020, 6, 21), TzRule::Utc),
            sun_times(80.0, 0.0, date(2021, 12, 21), TzRule::Utc),
        ];
        let csv = sun_times_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "date,lat,lon,sunrise,sunset,flag");
        assert!(lines[1].starts_with("2020-06-21,41.9,12.5,"));
        assert!(lines[1].ends_with(",normal"));
        assert!(lines[2].contains(",,,polar_night") || lines[2].ends_with(",,polar_night"));
    }

    #[test]
    fn monthly_boundaries_equator() {
        let (rise, set) = monthly_boundaries(0.0, 0.0, 2021, 3, TzRule::Utc);
        assert!((rise.unwrap() - 6.0).abs() <= 0.25);
        assert!((set.unwrap() - 18.0).abs() <= 0.25);
    }

    #[test]
    fn span_boundaries_average_then_round() {
        let months: Vec<(i32, u32)> = (1..=12).map(|m| (2021, m)).collect();
        let (rise, set) = span_boundaries(42.5, 12.5, &months, TzRule::CetCest).unwrap();
        // averages land on clean quarter-hour values
        assert_eq!(rise * 4.0, (rise * 4.0).round());
        assert_eq!(set * 4.0, (set * 4.0).round());
        assert!(rise > 5.0 && rise < 8.0, "rise {rise}");
        assert!(set > 17.0 && set < 20.0, "set {set}");
    }
}
