//! One-hour-ahead forecasting of hourly global horizontal irradiance.
//!
//! The crate bundles everything needed to fit and compare a family of
//! short-horizon irradiance models on hourly weather data:
//!
//! - [`solar`]: extraterrestrial horizontal irradiance, clearness index and
//!   the day/night indicator used to gate error metrics.
//! - [`ingest`]: TMY3 and generic CSV readers, range cleaning and short-gap
//!   imputation producing an [`HourlySeries`].
//! - [`baseline`]: the persistence ("same hour yesterday") forecast.
//! - [`sarima`]: seasonal ARIMA with period 24, fitted by conditional sum of
//!   squares and searched over a grid of orders.
//! - [`linear`]: cloud-cover regressions (LR, LMX, LDMX, LMX2 and its monthly
//!   variant) fitted by least squares.
//! - [`ann`]: a one-hidden-layer sigmoid perceptron trained by
//!   backpropagation with momentum.
//! - [`evaluation`]: daytime error metrics, split protocols and model
//!   comparison reports.
//! - [`synth`]: a deterministic synthetic benchmark generator.
//!
//! # Example
//!
//! ```
//! use irradcast::{baseline, synth};
//!
//! let series = synth::generate(&synth::SynthConfig { days: 3, ..Default::default() }).unwrap();
//! let forecast = baseline::simple_forecast(&series, 30).unwrap();
//! assert_eq!(forecast, series.records()[6].irradiance.unwrap());
//! ```

pub mod ann;
pub mod baseline;
mod error;
pub mod evaluation;
pub mod ingest;
pub mod linear;
pub mod models;
pub mod sarima;
pub mod series;
pub mod solar;
pub mod synth;

pub use error::{Error, Result};
pub use models::{FittedModel, ModelSpec};
pub use series::{HourlyRecord, HourlySeries, Quality};
pub use solar::SiteLocation;

/// Upper end of the feasible irradiance range, W/m².
pub const MAX_IRRADIANCE: f64 = 1050.0;
