//! Weather file readers, range cleaning and short-gap imputation.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::series::{GapReason, GapSpan, HourlyRecord, HourlySeries, Quality, Variable};
use crate::solar::{SiteLocation, MAX_CLEARNESS};
use crate::{Error, Result, MAX_IRRADIANCE};

/// Irradiance below this is treated as zero, W/m².
pub const MIN_IRRADIANCE: f64 = 10.0;

/// Longest run of missing hours that is filled by interpolation.
pub const MAX_IMPUTED_GAP: usize = 3;

/// Rows in a TMY3 file.
pub const TMY3_ROWS: usize = 8760;

/// Values at or below this are TMY3 missing-data sentinels.
const TMY3_MISSING: f64 = -9900.0;

/// Unit in which a source reports cloud cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudUnit {
    #[default]
    Fraction,
    Tenths,
    Oktas,
}

impl CloudUnit {
    fn divisor(self) -> f64 {
        match self {
            CloudUnit::Fraction => 1.0,
            CloudUnit::Tenths => 10.0,
            CloudUnit::Oktas => 8.0,
        }
    }

    /// Converts a raw reading to a fraction; out-of-range readings become `None`.
    pub fn to_fraction(self, raw: f64) -> Option<f64> {
        let v = raw / self.divisor();
        (0.0..=1.0).contains(&v).then_some(v)
    }
}

/// How the columns of a generic CSV map onto series fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub timestamp: String,
    pub irradiance: String,
    pub cloud_cover: String,
    #[serde(default)]
    pub cloud_unit: CloudUnit,
    /// chrono format string for the timestamp column.
    #[serde(default = "default_timestamp_format")]
    pub timestamp_format: String,
    /// Timestamps label the end of each hour rather than its start.
    #[serde(default)]
    pub hour_ending: bool,
}

fn default_timestamp_format() -> String {
    "%Y-%m-%d %H:%M".to_string()
}

impl ColumnMap {
    pub fn new(timestamp: &str, irradiance: &str, cloud_cover: &str, unit: CloudUnit) -> Self {
        Self {
            timestamp: timestamp.to_string(),
            irradiance: irradiance.to_string(),
            cloud_cover: cloud_cover.to_string(),
            cloud_unit: unit,
            timestamp_format: default_timestamp_format(),
            hour_ending: false,
        }
    }
}

fn parse_cell(cell: &str, line: usize, column: &str) -> Option<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            warn!("line {line}: unparseable {column} value `{cell}`, treated as missing");
            None
        }
    }
}

fn record(timestamp: NaiveDateTime, irradiance: Option<f64>, cloud_cover: Option<f64>) -> HourlyRecord {
    let quality = if irradiance.is_some() && cloud_cover.is_some() {
        Quality::Observed
    } else {
        Quality::Invalid
    };
    HourlyRecord {
        timestamp,
        irradiance,
        cloud_cover,
        quality,
    }
}

fn is_leap(year: i32) -> bool {
    NaiveDate::from_ymd_opt(year, 2, 29).is_some()
}

/// Reads an NREL TMY3 file.
///
/// Months of a TMY3 year come from different calendar years; every row is
/// re-stamped onto one non-leap year (that of the first row, or the year
/// before it when that one is leap) so the series is contiguous.
pub fn parse_tmy3<R: Read>(input: R) -> Result<HourlySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut rows = reader.records();

    let station = rows
        .next()
        .ok_or(Error::Parse {
            line: 1,
            message: "empty file".into(),
        })??;
    if station.len() < 6 {
        return Err(Error::Parse {
            line: 1,
            message: format!("station header has {} fields, expected at least 6", station.len()),
        });
    }
    let header_num = |idx: usize, what: &str| -> Result<f64> {
        station[idx].trim().parse::<f64>().map_err(|_| Error::Parse {
            line: 1,
            message: format!("bad {what} `{}`", &station[idx]),
        })
    };
    let utc_offset = header_num(3, "time zone")?;
    let latitude = header_num(4, "latitude")?;
    let longitude = header_num(5, "longitude")?;
    let site = SiteLocation::new(latitude, longitude, utc_offset).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;

    let columns = rows.next().ok_or(Error::Parse {
        line: 2,
        message: "missing column header".into(),
    })??;
    let find = |prefix: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| c.trim().starts_with(prefix))
            .ok_or_else(|| Error::Parse {
                line: 2,
                message: format!("no column starting with `{prefix}`"),
            })
    };
    let date_col = find("Date")?;
    let time_col = find("Time")?;
    let ghi_col = find("GHI (")?;
    let cloud_col = find("TotCld (")?;

    let mut records = Vec::with_capacity(TMY3_ROWS);
    let mut year = None;
    for (i, row) in rows.enumerate() {
        let row = row?;
        let line = i + 3;
        let cell = |idx: usize| row.get(idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(cell(date_col).trim(), "%m/%d/%Y").map_err(|e| {
            Error::Parse {
                line,
                message: format!("bad date `{}`: {e}", cell(date_col)),
            }
        })?;
        let hour_end: u32 = cell(time_col)
            .trim()
            .split(':')
            .next()
            .and_then(|h| h.parse().ok())
            .filter(|h| (1..=24).contains(h))
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("bad time `{}`", cell(time_col)),
            })?;
        let y = *year.get_or_insert_with(|| {
            if is_leap(date.year()) {
                date.year() - 1
            } else {
                date.year()
            }
        });
        let date = NaiveDate::from_ymd_opt(y, date.month(), date.day()).ok_or_else(|| {
            Error::Parse {
                line,
                message: format!("date {date} does not exist in year {y}"),
            }
        })?;
        let timestamp = date.and_hms_opt(hour_end - 1, 0, 0).expect("hour in 0..24");

        let ghi = parse_cell(cell(ghi_col), line, "GHI").filter(|v| *v > TMY3_MISSING);
        let cloud = parse_cell(cell(cloud_col), line, "TotCld").and_then(|v| {
            let frac = CloudUnit::Tenths.to_fraction(v);
            if frac.is_none() {
                warn!("line {line}: sky cover `{v}` outside 0..=10, treated as missing");
            }
            frac
        });
        records.push(record(timestamp, ghi, cloud));
    }
    if records.len() != TMY3_ROWS {
        return Err(Error::Structural(format!(
            "TMY3 file has {} data rows, expected {TMY3_ROWS}",
            records.len()
        )));
    }
    records.sort_by_key(|r| r.timestamp);
    HourlySeries::new(site, records)
}

/// Reads a CSV with named columns. Rows are sorted by time and hours absent
/// from the file are inserted as missing records.
pub fn parse_generic_csv<R: Read>(input: R, map: &ColumnMap, site: SiteLocation) -> Result<HourlySeries> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
    };
    let ts_col = col(&map.timestamp)?;
    let irr_col = col(&map.irradiance)?;
    let cc_col = col(&map.cloud_cover)?;

    let mut by_time: BTreeMap<NaiveDateTime, HourlyRecord> = BTreeMap::new();
    let mut duplicates = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let raw_ts = row.get(ts_col).unwrap_or("").trim();
        let mut ts = NaiveDateTime::parse_from_str(raw_ts, &map.timestamp_format)
            .or_else(|_| {
                NaiveDate::parse_from_str(raw_ts, &map.timestamp_format)
                    .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists"))
            })
            .map_err(|e| Error::Parse {
                line,
                message: format!("bad timestamp `{raw_ts}`: {e}"),
            })?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(Error::Parse {
                line,
                message: format!("timestamp `{raw_ts}` is not on the hour"),
            });
        }
        if map.hour_ending {
            ts -= Duration::hours(1);
        }
        let irr = parse_cell(row.get(irr_col).unwrap_or(""), line, &map.irradiance);
        let cc = parse_cell(row.get(cc_col).unwrap_or(""), line, &map.cloud_cover)
            .and_then(|v| map.cloud_unit.to_fraction(v));
        if by_time.insert(ts, record(ts, irr, cc)).is_some() {
            duplicates.push(ts);
        }
    }
    if !duplicates.is_empty() {
        duplicates.sort();
        duplicates.dedup();
        return Err(Error::DuplicateTimestamps(duplicates));
    }

    let mut records: Vec<HourlyRecord> = Vec::with_capacity(by_time.len());
    for (ts, rec) in by_time {
        if let Some(prev) = records.last().map(|r| r.timestamp) {
            let mut fill = prev + Duration::hours(1);
            while fill < ts {
                records.push(record(fill, None, None));
                fill += Duration::hours(1);
            }
        }
        records.push(rec);
    }
    HourlySeries::new(site, records)
}

/// Joins series from several files into one. Hours between the parts become
/// missing records; an hour present in two parts is an error.
pub fn concatenate(site: SiteLocation, parts: &[HourlySeries]) -> Result<HourlySeries> {
    let mut all: Vec<HourlyRecord> = parts.iter().flat_map(|p| p.records().iter().copied()).collect();
    all.sort_by_key(|r| r.timestamp);
    let mut duplicates: Vec<NaiveDateTime> = all
        .windows(2)
        .filter(|w| w[0].timestamp == w[1].timestamp)
        .map(|w| w[0].timestamp)
        .collect();
    if !duplicates.is_empty() {
        duplicates.dedup();
        return Err(Error::DuplicateTimestamps(duplicates));
    }
    let mut records: Vec<HourlyRecord> = Vec::with_capacity(all.len());
    for rec in all {
        if let Some(prev) = records.last().map(|r| r.timestamp) {
            let mut fill = prev + Duration::hours(1);
            while fill < rec.timestamp {
                records.push(record(fill, None, None));
                fill += Duration::hours(1);
            }
        }
        records.push(rec);
    }
    HourlySeries::new(site, records)
}

/// Clamps one irradiance value to the feasible range.
pub fn clean_irradiance_value(i: f64) -> f64 {
    if i < MIN_IRRADIANCE {
        0.0
    } else {
        i.min(MAX_IRRADIANCE)
    }
}

/// Applies the irradiance range rules: below 10 W/m² becomes 0, above 1050
/// W/m² becomes 1050. Cloud cover is clamped to `[0, 1]`.
pub fn clean_irradiance(series: &HourlySeries) -> HourlySeries {
    let mut out = series.clone();
    for r in out.records_mut() {
        r.irradiance = r.irradiance.map(clean_irradiance_value);
        r.cloud_cover = r.cloud_cover.map(|c| c.clamp(0.0, 1.0));
    }
    out
}

/// Clamps clearness indices to `[0, 0.85]`.
pub fn clean_clearness(k: &[f64]) -> Vec<f64> {
    k.iter().map(|v| v.clamp(0.0, MAX_CLEARNESS)).collect()
}

/// Runs of `None` as `(start, len)`.
fn missing_runs(values: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut t = 0;
    while t < values.len() {
        if values[t].is_none() {
            let start = t;
            while t < values.len() && values[t].is_none() {
                t += 1;
            }
            runs.push((start, t - start));
        } else {
            t += 1;
        }
    }
    runs
}

fn classify(start: usize, len: usize, n: usize) -> GapReason {
    if start == 0 || start + len == n {
        GapReason::Boundary
    } else if len > MAX_IMPUTED_GAP {
        GapReason::TooLong
    } else {
        GapReason::Pending
    }
}

fn variable_values(series: &HourlySeries, var: Variable) -> Vec<Option<f64>> {
    series
        .records()
        .iter()
        .map(|r| match var {
            Variable::Irradiance => r.irradiance,
            Variable::CloudCover => r.cloud_cover,
        })
        .collect()
}

/// Every run of missing values in the series, classified.
pub fn unresolved_gaps(series: &HourlySeries) -> Vec<GapSpan> {
    let n = series.len();
    let mut gaps = Vec::new();
    for var in [Variable::Irradiance, Variable::CloudCover] {
        for (start, len) in missing_runs(&variable_values(series, var)) {
            gaps.push(GapSpan {
                variable: var,
                start: series.timestamp(start),
                hours: len,
                reason: classify(start, len, n),
            });
        }
    }
    gaps.sort_by_key(|g| (g.start, g.variable == Variable::CloudCover));
    gaps
}

/// Fills interior gaps of up to three hours; a single missing hour gets the
/// mean of its neighbours, two or three get linear interpolation. Longer gaps
/// and gaps touching either end stay missing, are listed in the gap report and
/// their records are marked invalid. Observed values are never touched.
pub fn impute_gaps(series: &HourlySeries) -> HourlySeries {
    let n = series.len();
    let mut out = series.clone();
    let mut imputed = vec![false; n];
    for var in [Variable::Irradiance, Variable::CloudCover] {
        let mut values = variable_values(series, var);
        for (start, len) in missing_runs(&values) {
            if classify(start, len, n) != GapReason::Pending {
                continue;
            }
            let left = values[start - 1].expect("run is bounded by present values");
            let right = values[start + len].expect("run is bounded by present values");
            for j in 0..len {
                values[start + j] = Some(if len == 1 {
                    (left + right) / 2.0
                } else {
                    left + (right - left) * (j + 1) as f64 / (len + 1) as f64
                });
                imputed[start + j] = true;
            }
        }
        for (r, v) in out.records_mut().iter_mut().zip(values) {
            match var {
                Variable::Irradiance => r.irradiance = v,
                Variable::CloudCover => r.cloud_cover = v,
            }
        }
    }
    for (r, was_imputed) in out.records_mut().iter_mut().zip(imputed) {
        if !r.is_complete() {
            r.quality = Quality::Invalid;
        } else if was_imputed {
            r.quality = Quality::Imputed;
        }
    }
    let gaps = unresolved_gaps(&out);
    out.with_gap_report(gaps)
}

/// Cleaning, imputation, then the range rules again so that interpolated
/// values obey them too: the standard ingest pipeline.
pub fn prepare(series: &HourlySeries) -> HourlySeries {
    clean_irradiance(&impute_gaps(&clean_irradiance(series)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(h: i64) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2013, 5, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            + Duration::hours(h)
    }

    fn series_of(values: &[Option<f64>]) -> HourlySeries {
        let recs = values
            .iter()
            .enumerate()
            .map(|(h, v)| record(ts(h as i64), *v, Some(0.5)))
            .collect();
        HourlySeries::new(SiteLocation::phoenix(), recs).unwrap()
    }

    fn irr(s: &HourlySeries) -> Vec<Option<f64>> {
        s.records().iter().map(|r| r.irradiance).collect()
    }

    #[test]
    fn concatenate_parts() {
        let a = series_of(&[Some(100.0), Some(200.0)]);
        let later: Vec<HourlyRecord> = [5, 6]
            .iter()
            .map(|&h| record(ts(h), Some(300.0), Some(0.5)))
            .collect();
        let b = HourlySeries::new(SiteLocation::phoenix(), later).unwrap();
        let joined = concatenate(SiteLocation::phoenix(), &[b.clone(), a.clone()]).unwrap();
        assert_eq!(joined.len(), 7);
        assert_eq!(irr(&joined)[..3], [Some(100.0), Some(200.0), None]);
        assert_eq!(joined.records()[3].quality, Quality::Invalid);
        assert_eq!(joined.irradiance(5), Some(300.0));

        assert!(matches!(
            concatenate(SiteLocation::phoenix(), &[a.clone(), a]),
            Err(Error::DuplicateTimestamps(v)) if v.len() == 2
        ));
    }

    #[test]
    fn irradiance_cleaning_examples() {
        assert_eq!(clean_irradiance_value(5.0), 0.0);
        assert_eq!(clean_irradiance_value(-3.0), 0.0);
        assert_eq!(clean_irradiance_value(1100.0), 1050.0);
        assert_eq!(clean_irradiance_value(600.0), 600.0);
        assert_eq!(clean_irradiance_value(10.0), 10.0);
    }

    #[test]
    fn clearness_cleaning_examples() {
        assert_eq!(clean_clearness(&[-0.02, 0.9, 0.5]), vec![0.0, 0.85, 0.5]);
    }

    #[test]
    fn single_gap_mean() {
        let s = impute_gaps(&series_of(&[Some(400.0), None, Some(500.0)]));
        assert_eq!(irr(&s), vec![Some(400.0), Some(450.0), Some(500.0)]);
        assert_eq!(s.records()[1].quality, Quality::Imputed);
        assert_eq!(s.records()[0].quality, Quality::Observed);
        assert!(s.gap_report().is_empty());
    }

    #[test]
    fn three_hour_gap_interpolated() {
        let s = impute_gaps(&series_of(&[Some(100.0), None, None, None, Some(500.0)]));
        assert_eq!(
            irr(&s),
            vec![Some(100.0), Some(200.0), Some(300.0), Some(400.0), Some(500.0)]
        );
    }

    #[test]
    fn four_hour_gap_left_missing() {
        let s = impute_gaps(&series_of(&[
            Some(300.0),
            None,
            None,
            None,
            None,
            Some(500.0),
        ]));
        assert_eq!(irr(&s)[1..5], [None, None, None, None]);
        assert!(s.records()[1..5].iter().all(|r| r.quality == Quality::Invalid));
        assert_eq!(s.gap_report().len(), 1);
        assert_eq!(s.gap_report()[0].hours, 4);
        assert_eq!(s.gap_report()[0].reason, GapReason::TooLong);
        assert_eq!(s.gap_report()[0].start, ts(1));
    }

    #[test]
    fn boundary_gap_reported() {
        let s = impute_gaps(&series_of(&[None, Some(1.0), Some(2.0), None]));
        assert_eq!(irr(&s)[0], None);
        assert_eq!(irr(&s)[3], None);
        assert_eq!(s.gap_report().len(), 2);
        assert!(s.gap_report().iter().all(|g| g.reason == GapReason::Boundary));
    }

    #[test]
    fn no_gaps_unchanged() {
        let s0 = series_of(&[Some(1.0), Some(2.0), Some(3.0)]);
        let s = impute_gaps(&s0);
        assert_eq!(s, s0);
        assert!(s.gap_report().is_empty());
    }

    #[test]
    fn generic_csv_units_and_sorting() {
        let site = SiteLocation::phoenix();
        let okta = ColumnMap::new("time", "ghi", "cc", CloudUnit::Oktas);
        let text = "time,ghi,cc\n2013-05-01 01:00,200,4\n2013-05-01 00:00,100,8\n";
        let s = parse_generic_csv(text.as_bytes(), &okta, site).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[0].irradiance, Some(100.0));
        assert_eq!(s.records()[0].cloud_cover, Some(1.0));
        assert_eq!(s.records()[1].cloud_cover, Some(0.5));

        let frac = ColumnMap::new("time", "ghi", "cc", CloudUnit::Fraction);
        let sorted = "time,ghi,cc\n2013-05-01 00:00,100,0.3\n2013-05-01 01:00,200,0.3\n";
        let shuffled = "time,ghi,cc\n2013-05-01 01:00,200,0.3\n2013-05-01 00:00,100,0.3\n";
        let a = parse_generic_csv(sorted.as_bytes(), &frac, site).unwrap();
        let b = parse_generic_csv(shuffled.as_bytes(), &frac, site).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records()[0].cloud_cover, Some(0.3));
    }

    #[test]
    fn generic_csv_errors() {
        let site = SiteLocation::phoenix();
        let map = ColumnMap::new("time", "ghi", "cloud", CloudUnit::Fraction);
        let text = "time,ghi,cc\n2013-05-01 00:00,100,0.3\n";
        assert!(matches!(
            parse_generic_csv(text.as_bytes(), &map, site),
            Err(Error::Config(_))
        ));

        let map = ColumnMap::new("time", "ghi", "cc", CloudUnit::Fraction);
        let dup = "time,ghi,cc\n2013-05-01 00:00,100,0.3\n2013-05-01 00:00,120,0.3\n2013-05-01 01:00,1,0\n";
        match parse_generic_csv(dup.as_bytes(), &map, site) {
            Err(Error::DuplicateTimestamps(ts)) => assert_eq!(ts, vec![super::tests::ts(0)]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn generic_csv_fills_absent_hours() {
        let map = ColumnMap::new("time", "ghi", "cc", CloudUnit::Fraction);
        let text = "time,ghi,cc\n2013-05-01 00:00,100,0.3\n2013-05-01 02:00,300,0.3\n";
        let s = parse_generic_csv(text.as_bytes(), &map, SiteLocation::phoenix()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.records()[1].quality, Quality::Invalid);
        assert_eq!(impute_gaps(&s).irradiance(1), Some(200.0));
    }

    fn arb_values() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.8, -200.0..1500.0f64), 1..200)
    }

    proptest! {
        #[test]
        fn cleaning_idempotent_and_in_range(values in arb_values()) {
            let s = series_of(&values);
            let once = clean_irradiance(&s);
            let twice = clean_irradiance(&once);
            prop_assert_eq!(&once, &twice);
            for r in once.records() {
                if let Some(i) = r.irradiance {
                    prop_assert!((0.0..=MAX_IRRADIANCE).contains(&i));
                }
            }
        }

        #[test]
        fn clearness_cleaning_idempotent(k in prop::collection::vec(-1.0..2.0f64, 0..100)) {
            let once = clean_clearness(&k);
            prop_assert_eq!(clean_clearness(&once), once.clone());
            prop_assert!(once.iter().all(|v| (0.0..=MAX_CLEARNESS).contains(v)));
        }

        #[test]
        fn imputation_keeps_observed(values in arb_values()) {
            let s = series_of(&values);
            let filled = impute_gaps(&s);
            for (a, b) in s.records().iter().zip(filled.records()) {
                if a.irradiance.is_some() {
                    prop_assert_eq!(a.irradiance, b.irradiance);
                }
            }
        }
    }
}
