//! Deterministic synthetic hourly irradiance and cloud cover.
//!
//! Clear-sky irradiance is a fixed fraction of the extraterrestrial
//! horizontal value. Cloud cover follows a bounded, mean-reverting random
//! walk whose level varies with the season, and irradiance is attenuated
//! linearly by cloud cover with Gaussian noise added during daylight. The
//! result is passed through [`ingest::prepare`](crate::ingest::prepare).

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::series::HourlyRecord;
use crate::{ingest, solar, Error, HourlySeries, Result, SiteLocation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CloudProcess {
    /// Mean-reverting random walk clamped to [0, 1].
    RandomWalk {
        /// Standard deviation of the hourly step.
        step_sigma: f64,
        /// Fraction of the gap to the seasonal mean closed each hour.
        reversion: f64,
        /// Annual mean cloud cover.
        mean: f64,
        /// Seasonal swing of the mean, peaking in mid-January.
        seasonal_amplitude: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for CloudProcess {
    fn default() -> Self {
        CloudProcess::RandomWalk {
            step_sigma: 0.08,
            reversion: 0.03,
            mean: 0.3,
            seasonal_amplitude: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub site: SiteLocation,
    /// Calendar year of the first hour (January 1, 00:00).
    pub year: i32,
    pub days: usize,
    /// Clear-sky irradiance as a fraction of the extraterrestrial value.
    pub clear_sky_fraction: f64,
    /// Share of clear-sky irradiance removed by full cloud cover.
    pub cloud_attenuation: f64,
    /// Daylight noise standard deviation, W/m².
    pub noise_sigma: f64,
    pub cloud: CloudProcess,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            site: SiteLocation::phoenix(),
            year: 2013,
            days: 365,
            clear_sky_fraction: 0.75,
            cloud_attenuation: 0.75,
            noise_sigma: 20.0,
            cloud: CloudProcess::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        if self.days == 0 {
            return Err(Error::Config("days must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise_sigma {} invalid", self.noise_sigma)));
        }
        for (name, v) in [
            ("clear_sky_fraction", self.clear_sky_fraction),
            ("cloud_attenuation", self.cloud_attenuation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        match self.cloud {
            CloudProcess::Constant { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::Config(format!("constant cloud cover {value} outside [0, 1]")))
            }
            CloudProcess::RandomWalk {
                step_sigma,
                reversion,
                ..
            } if !(step_sigma >= 0.0 && (0.0..=1.0).contains(&reversion)) => Err(Error::Config(
                "random walk needs step_sigma >= 0 and reversion in [0, 1]".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Generates and cleans the synthetic series.
pub fn generate(config: &SynthConfig) -> Result<HourlySeries> {
    Ok(ingest::prepare(&generate_raw(config)?))
}

/// The synthetic series before cleaning.
pub fn generate_raw(config: &SynthConfig) -> Result<HourlySeries> {
    config.validate()?;
    let t0 = NaiveDate::from_ymd_opt(config.year, 1, 1)
        .ok_or_else(|| Error::Config(format!("year {} out of range", config.year)))?
        .and_hms_opt(0, 0, 0)
        .expect("midnight");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let step = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()));

    let mut cc = match config.cloud {
        CloudProcess::RandomWalk { mean, .. } => mean.clamp(0.0, 1.0),
        CloudProcess::Constant { value } => value,
    };
    let mut records = Vec::with_capacity(config.days * 24);
    for h in 0..config.days * 24 {
        let ts = t0 + Duration::hours(h as i64);
        if let CloudProcess::RandomWalk {
            step_sigma,
            reversion,
            mean,
            seasonal_amplitude,
        } = config.cloud
        {
            let doy = ts.ordinal() as f64;
            let level = mean + seasonal_amplitude * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.0).cos();
            let jump: f64 = step(step_sigma)?.sample(&mut rng);
            cc = (cc + reversion * (level - cc) + jump).clamp(0.0, 1.0);
        }
        let i0 = solar::extraterrestrial_horizontal(&config.site, ts);
        let envelope = config.clear_sky_fraction * i0;
        let mut irr = envelope * (1.0 - config.cloud_attenuation * cc);
        // Keep the generator stream aligned whether or not the hour is lit.
        let e: f64 = if config.noise_sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            let _: f64 = rng.random();
            0.0
        };
        if solar::day_night_flag(i0) {
            irr += e;
        }
        records.push(HourlyRecord::observed(ts, irr, cc));
    }
    HourlySeries::new(config.site, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_year_of_hours() {
        let s = generate(&SynthConfig::default()).unwrap();
        assert_eq!(s.len(), 8760);
        assert!(s.records().iter().all(|r| r.is_complete()));
    }

    #[test]
    fn seeded() {
        let c = SynthConfig {
            days: 20,
            ..Default::default()
        };
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
        let other = SynthConfig { seed: 43, ..c.clone() };
        assert_ne!(generate(&c).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn clear_noiseless_is_envelope() {
        let c = SynthConfig {
            days: 3,
            noise_sigma: 0.0,
            cloud: CloudProcess::Constant { value: 0.0 },
            ..Default::default()
        };
        let s = generate_raw(&c).unwrap();
        for t in 0..s.len() {
            assert_eq!(s.irradiance(t).unwrap(), 0.75 * s.i0(t));
            assert_eq!(s.cloud_cover(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn night_is_dark() {
        let s = generate(&SynthConfig {
            days: 10,
            ..Default::default()
        })
        .unwrap();
        for t in 0..s.len() {
            if !s.is_daytime(t) {
                assert_eq!(s.irradiance(t).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SynthConfig {
            cloud: CloudProcess::Constant { value: 1.5 },
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
        assert!(generate(&SynthConfig {
            days: 0,
            ..Default::default()
        })
        .is_err());
    }
}
