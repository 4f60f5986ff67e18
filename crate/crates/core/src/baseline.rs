//! Persistence forecast: each hour is predicted by the same hour one day earlier.

use crate::{Error, HourlySeries, Result};

/// Seasonal lag of the persistence forecast, hours.
pub const DAY: usize = 24;

/// Irradiance observed 24 hours before hour `t`.
pub fn simple_forecast(series: &HourlySeries, t: usize) -> Result<f64> {
    let unavailable = Error::UnavailableLag { index: t, lag: DAY };
    if t < DAY {
        return Err(unavailable);
    }
    series.irradiance(t - DAY).ok_or(unavailable)
}
