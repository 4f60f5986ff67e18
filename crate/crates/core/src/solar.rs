//! Solar geometry: extraterrestrial horizontal irradiance, clearness index and
//! the day/night indicator.
//!
//! Times are local standard time. A record stamped `h:00` covers the interval
//! `[h:00, h+1:00)` and its geometry is evaluated at the interval midpoint,
//! since measured irradiance values are hourly averages.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Solar constant, W/m².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// Extraterrestrial irradiance at or below which an hour counts as night, W/m².
pub const DAYLIGHT_THRESHOLD: f64 = 1.0;

/// Upper end of the feasible clearness-index range.
pub const MAX_CLEARNESS: f64 = 0.85;

/// Geographic position of a measurement site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteLocation {
    /// Degrees north, in [-90, 90].
    pub latitude: f64,
    /// Degrees east, in [-180, 180].
    pub longitude: f64,
    /// Hours from UTC of local standard time, in [-12, 14].
    pub utc_offset: f64,
}

impl SiteLocation {
    /// Validates the ranges of all fields.
    pub fn new(latitude: f64, longitude: f64, utc_offset: f64) -> Result<Self> {
        let site = Self {
            latitude,
            longitude,
            utc_offset,
        };
        site.validate()?;
        Ok(site)
    }

    /// Phoenix Sky Harbor, Arizona.
    pub fn phoenix() -> Self {
        Self {
            latitude: 33.45,
            longitude: -111.983,
            utc_offset: -7.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (-90.0..=90.0).contains(&self.latitude)
            && (-180.0..=180.0).contains(&self.longitude)
            && (-12.0..=14.0).contains(&self.utc_offset);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("site out of range: {self:?}")))
        }
    }
}

/// Clearness index of one hour together with the quantities it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearnessSample {
    pub k: f64,
    pub i0: f64,
    pub daytime: bool,
}

impl ClearnessSample {
    pub fn new(irradiance: f64, i0: f64) -> Self {
        Self {
            k: clearness_index(irradiance, i0),
            i0,
            daytime: day_night_flag(i0),
        }
    }
}

/// Eccentricity correction factor (Spencer's Fourier series) for fractional day angle.
fn eccentricity(day_angle: f64) -> f64 {
    1.000110 + 0.034221 * day_angle.cos() + 0.001280 * day_angle.sin()
        + 0.000719 * (2.0 * day_angle).cos()
        + 0.000077 * (2.0 * day_angle).sin()
}

/// Equation of time in minutes (Spencer).
fn equation_of_time(day_angle: f64) -> f64 {
    229.18
        * (0.000075 + 0.001868 * day_angle.cos()
            - 0.032077 * day_angle.sin()
            - 0.014615 * (2.0 * day_angle).cos()
            - 0.04089 * (2.0 * day_angle).sin())
}

/// Cooper's declination, radians.
fn declination(day_of_year: f64) -> f64 {
    23.45_f64.to_radians() * (2.0 * PI * (284.0 + day_of_year) / 365.0).sin()
}

/// Cosine of the solar zenith angle at an instant given as local standard time.
pub fn cos_zenith(site: &SiteLocation, instant: NaiveDateTime) -> f64 {
    let n = instant.ordinal() as f64;
    let day_angle = 2.0 * PI * (n - 1.0) / 365.0;
    let clock_hours = instant.hour() as f64
        + instant.minute() as f64 / 60.0
        + instant.second() as f64 / 3600.0;
    let standard_meridian = 15.0 * site.utc_offset;
    let solar_hours = clock_hours
        + (4.0 * (site.longitude - standard_meridian) + equation_of_time(day_angle)) / 60.0;
    let hour_angle = (15.0 * (solar_hours - 12.0)).to_radians();
    let lat = site.latitude.to_radians();
    let dec = declination(n);
    lat.sin() * dec.sin() + lat.cos() * dec.cos() * hour_angle.cos()
}

/// Extraterrestrial irradiance on a horizontal plane at an exact instant, W/m².
pub fn extraterrestrial_at(site: &SiteLocation, instant: NaiveDateTime) -> f64 {
    let n = instant.ordinal() as f64;
    let day_angle = 2.0 * PI * (n - 1.0) / 365.0;
    SOLAR_CONSTANT * eccentricity(day_angle) * cos_zenith(site, instant).max(0.0)
}

/// Extraterrestrial horizontal irradiance for the hour starting at `hour_start`,
/// evaluated at the hour midpoint.
pub fn extraterrestrial_horizontal(site: &SiteLocation, hour_start: NaiveDateTime) -> f64 {
    extraterrestrial_at(site, hour_start + Duration::minutes(30))
}

/// Ratio of measured to extraterrestrial irradiance, clamped to `[0, 0.85]`;
/// zero at night.
pub fn clearness_index(irradiance: f64, i0: f64) -> f64 {
    if !day_night_flag(i0) {
        return 0.0;
    }
    (irradiance / i0).clamp(0.0, MAX_CLEARNESS)
}

/// `true` for daytime hours.
pub fn day_night_flag(i0: f64) -> bool {
    i0 > DAYLIGHT_THRESHOLD
}
