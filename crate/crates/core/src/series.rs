//! Hourly series container and the canonical CSV format.

use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::solar::{self, SiteLocation};
use crate::{Error, Result};

/// Header of the canonical series file. Must match byte for byte.
pub const CANONICAL_HEADER: &str = "timestamp,irradiance_wm2,cloud_cover_frac,quality";

/// Timestamp layout of the canonical file (ISO-8601, local standard time).
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Observed,
    Imputed,
    Invalid,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Observed => "observed",
            Quality::Imputed => "imputed",
            Quality::Invalid => "invalid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "observed" => Some(Quality::Observed),
            "imputed" => Some(Quality::Imputed),
            "invalid" => Some(Quality::Invalid),
            _ => None,
        }
    }
}

/// One hour of data. `timestamp` is the start of the hour in local standard time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyRecord {
    pub timestamp: NaiveDateTime,
    /// Global horizontal irradiance, W/m².
    pub irradiance: Option<f64>,
    /// Cloud cover as a fraction of the sky.
    pub cloud_cover: Option<f64>,
    pub quality: Quality,
}

impl HourlyRecord {
    pub fn observed(timestamp: NaiveDateTime, irradiance: f64, cloud_cover: f64) -> Self {
        Self {
            timestamp,
            irradiance: Some(irradiance),
            cloud_cover: Some(cloud_cover),
            quality: Quality::Observed,
        }
    }

    /// Both variables present.
    pub fn is_complete(&self) -> bool {
        self.irradiance.is_some() && self.cloud_cover.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Irradiance,
    CloudCover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapReason {
    /// Longer than the imputation limit.
    TooLong,
    /// Touches the start or end of the series.
    Boundary,
    /// Short enough to impute but not yet imputed.
    Pending,
}

/// A run of consecutive missing values that was left unfilled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSpan {
    pub variable: Variable,
    pub start: NaiveDateTime,
    pub hours: usize,
    pub reason: GapReason,
}

/// Time-ordered hourly records at strict one-hour spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    site: SiteLocation,
    records: Vec<HourlyRecord>,
    gap_report: Vec<GapSpan>,
}

impl HourlySeries {
    /// Builds a series, checking that timestamps advance by exactly one hour.
    pub fn new(site: SiteLocation, records: Vec<HourlyRecord>) -> Result<Self> {
        site.validate()?;
        for (i, pair) in records.windows(2).enumerate() {
            let step = pair[1].timestamp - pair[0].timestamp;
            if step != Duration::hours(1) {
                return Err(Error::Structural(format!(
                    "records {} and {} are {} minutes apart ({} -> {})",
                    i,
                    i + 1,
                    step.num_minutes(),
                    pair[0].timestamp,
                    pair[1].timestamp
                )));
            }
        }
        Ok(Self {
            site,
            records,
            gap_report: Vec::new(),
        })
    }

    pub(crate) fn with_gap_report(mut self, gaps: Vec<GapSpan>) -> Self {
        self.gap_report = gaps;
        self
    }

    pub(crate) fn records_mut(&mut self) -> &mut [HourlyRecord] {
        &mut self.records
    }

    pub fn site(&self) -> &SiteLocation {
        &self.site
    }

    pub fn records(&self) -> &[HourlyRecord] {
        &self.records
    }

    pub fn gap_report(&self) -> &[GapSpan] {
        &self.gap_report
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.records[t].timestamp
    }

    pub fn irradiance(&self, t: usize) -> Option<f64> {
        self.records.get(t).and_then(|r| r.irradiance)
    }

    pub fn cloud_cover(&self, t: usize) -> Option<f64> {
        self.records.get(t).and_then(|r| r.cloud_cover)
    }

    /// Extraterrestrial horizontal irradiance for hour `t`.
    pub fn i0(&self, t: usize) -> f64 {
        solar::extraterrestrial_horizontal(&self.site, self.records[t].timestamp)
    }

    pub fn is_daytime(&self, t: usize) -> bool {
        solar::day_night_flag(self.i0(t))
    }

    pub fn extraterrestrial(&self) -> Vec<f64> {
        (0..self.len()).map(|t| self.i0(t)).collect()
    }

    pub fn daytime_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|t| self.is_daytime(t)).collect()
    }

    /// Clearness index per hour; `None` where irradiance is missing.
    pub fn clearness(&self) -> Vec<Option<f64>> {
        (0..self.len())
            .map(|t| {
                self.irradiance(t)
                    .map(|i| solar::clearness_index(i, self.i0(t)))
            })
            .collect()
    }

    /// Irradiance as a dense vector; fails on the first missing value.
    pub fn irradiance_values(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .enumerate()
            .map(|(t, r)| r.irradiance.ok_or(Error::MissingValue(t)))
            .collect()
    }

    /// Index of the hour starting at `ts`, if present.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let first = self.records.first()?.timestamp;
        let offset = (ts - first).num_hours();
        if offset < 0 || (ts - first) != Duration::hours(offset) {
            return None;
        }
        let offset = offset as usize;
        (offset < self.len()).then_some(offset)
    }

    /// Calendar year, month and day of hour `t`.
    pub fn ymd(&self, t: usize) -> (i32, u32, u32) {
        let ts = self.records[t].timestamp;
        (ts.year(), ts.month(), ts.day())
    }

    /// Hour-of-day index in 1..=24, hour `h:00-h+1:00` being `h + 1`.
    pub fn hour_index(&self, t: usize) -> u32 {
        self.records[t].timestamp.hour() + 1
    }

    /// Writes the canonical CSV representation.
    pub fn write_canonical<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CANONICAL_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.timestamp.format(TIMESTAMP_FORMAT),
                fmt_opt(r.irradiance),
                fmt_opt(r.cloud_cover),
                r.quality.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_canonical(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("canonical output is ASCII")
    }

    /// Reads the canonical CSV representation. Unfilled gaps are recovered from
    /// the missing values so that a written series reads back identically.
    pub fn read_canonical<R: Read>(input: R, site: SiteLocation) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(input);
        let mut records = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let line = i + 1;
            if i == 0 {
                let header = row.iter().collect::<Vec<_>>().join(",");
                if header != CANONICAL_HEADER {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected header `{CANONICAL_HEADER}`, found `{header}`"),
                    });
                }
                continue;
            }
            if row.len() != 4 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 4 fields, found {}", row.len()),
                });
            }
            let timestamp = NaiveDateTime::parse_from_str(&row[0], TIMESTAMP_FORMAT).map_err(
                |e| Error::Parse {
                    line,
                    message: format!("bad timestamp `{}`: {e}", &row[0]),
                },
            )?;
            let irradiance = parse_opt(&row[1], line)?;
            let cloud_cover = parse_opt(&row[2], line)?;
            let quality = Quality::parse(&row[3]).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown quality `{}`", &row[3]),
            })?;
            records.push(HourlyRecord {
                timestamp,
                irradiance,
                cloud_cover,
                quality,
            });
        }
        let series = Self::new(site, records)?;
        let gaps = crate::ingest::unresolved_gaps(&series);
        Ok(series.with_gap_report(gaps))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(cell: &str, line: usize) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|e| Error::Parse {
        line,
        message: format!("bad number `{cell}`: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2013, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
    }

    #[test]
    fn rejects_irregular_spacing() {
        let recs = vec![
            HourlyRecord::observed(start(), 0.0, 0.1),
            HourlyRecord::observed(start() + Duration::hours(2), 0.0, 0.1),
        ];
        assert!(matches!(
            HourlySeries::new(SiteLocation::phoenix(), recs),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn canonical_round_trip_with_gaps() {
        let mut recs: Vec<_> = (0..10)
            .map(|h| HourlyRecord::observed(start() + Duration::hours(h), h as f64 * 10.5, 0.3))
            .collect();
        for r in &mut recs[0..2] {
            r.irradiance = None;
            r.quality = Quality::Invalid;
        }
        recs[5].quality = Quality::Imputed;
        let s = HourlySeries::new(SiteLocation::phoenix(), recs).unwrap();
        let text = s.to_canonical_string();
        assert!(text.starts_with("timestamp,irradiance_wm2,cloud_cover_frac,quality\n"));
        assert!(text.contains("2013-01-01T00:00,,0.3,invalid"));
        let back = HourlySeries::read_canonical(text.as_bytes(), SiteLocation::phoenix()).unwrap();
        assert_eq!(back.records(), s.records());
        assert_eq!(back.gap_report().len(), 1);
        assert_eq!(back.gap_report()[0].reason, GapReason::Boundary);
        assert_eq!(back.to_canonical_string(), text);
    }

    #[test]
    fn canonical_header_must_match() {
        let text = "time,irradiance_wm2,cloud_cover_frac,quality\n";
        let err = HourlySeries::read_canonical(text.as_bytes(), SiteLocation::phoenix()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn index_of_and_hour_index() {
        let recs: Vec<_> = (0..30)
            .map(|h| HourlyRecord::observed(start() + Duration::hours(h), 0.0, 0.0))
            .collect();
        let s = HourlySeries::new(SiteLocation::phoenix(), recs).unwrap();
        assert_eq!(s.index_of(start() + Duration::hours(25)), Some(25));
        assert_eq!(s.index_of(start() - Duration::hours(1)), None);
        assert_eq!(s.index_of(start() + Duration::hours(30)), None);
        assert_eq!(s.hour_index(0), 1);
        assert_eq!(s.hour_index(23), 24);
    }
}
