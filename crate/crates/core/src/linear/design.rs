//! Design matrices for the cloud-cover regression family.

use chrono::Datelike;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, HourlySeries, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Day-old irradiance plus the day-over-day cloud-cover change.
    #[serde(rename = "LR")]
    Lr,
    /// Hourly and daily irradiance lags with cloud-cover differences.
    #[serde(rename = "LMX")]
    Lmx,
    /// As LMX with differenced hourly irradiance lags.
    #[serde(rename = "LDMX")]
    Ldmx,
    /// Annual model with hour-of-day and month indicators.
    #[serde(rename = "LMX2")]
    Lmx2,
    /// Monthly variant of LMX2, without month indicators.
    #[serde(rename = "LMX2M")]
    Lmx2m,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lr => "LR",
            Family::Lmx => "LMX",
            Family::Ldmx => "LDMX",
            Family::Lmx2 => "LMX2",
            Family::Lmx2m => "LMX2M",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Annual,
    /// Calendar month, 1..=12.
    Monthly(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFilter {
    #[default]
    AllHours,
    DaytimeOnly,
}

/// Declarative description of one regression variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DesignSpec {
    pub family: Family,
    /// Hourly lag depth; LMX and LDMX only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub scope: Scope,
    #[serde(default)]
    pub data_filter: DataFilter,
    #[serde(default)]
    pub include_intercept: bool,
}

/// Deepest hourly lag used by any family.
pub const SEASONAL_LAG: usize = 24;

impl DesignSpec {
    fn base(family: Family, order: Option<usize>, scope: Scope) -> Self {
        Self {
            family,
            order,
            scope,
            data_filter: DataFilter::AllHours,
            include_intercept: false,
        }
    }

    pub fn lr(scope: Scope) -> Self {
        Self::base(Family::Lr, None, scope)
    }

    pub fn lmx(order: usize, scope: Scope) -> Self {
        Self::base(Family::Lmx, Some(order), scope)
    }

    pub fn ldmx(order: usize, scope: Scope) -> Self {
        Self::base(Family::Ldmx, Some(order), scope)
    }

    pub fn lmx2() -> Self {
        Self::base(Family::Lmx2, None, Scope::Annual)
    }

    pub fn lmx2m(month: u32) -> Self {
        Self::base(Family::Lmx2m, None, Scope::Monthly(month))
    }

    pub fn daytime(mut self) -> Self {
        self.data_filter = DataFilter::DaytimeOnly;
        self
    }

    pub fn with_intercept(mut self) -> Self {
        self.include_intercept = true;
        self
    }

    pub fn with_scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match (self.family, self.order) {
            (Family::Lmx | Family::Ldmx, Some(m)) if (1..=4).contains(&m) => {}
            (Family::Lmx | Family::Ldmx, other) => {
                return bad(format!("{} needs order 1..=4, got {other:?}", self.family.as_str()))
            }
            (_, Some(m)) => {
                return bad(format!("{} takes no order, got {m}", self.family.as_str()))
            }
            (_, None) => {}
        }
        match (self.family, self.scope) {
            (Family::Lmx2, Scope::Monthly(_)) => return bad("LMX2 is annual-only".into()),
            (Family::Lmx2m, Scope::Annual) => return bad("LMX2M is monthly-only".into()),
            (_, Scope::Monthly(m)) if !(1..=12).contains(&m) => {
                return bad(format!("month {m} outside 1..=12"))
            }
            _ => {}
        }
        Ok(())
    }

    /// Short label such as `LMX(2)`.
    pub fn label(&self) -> String {
        let mut s = self.family.as_str().to_string();
        if let Some(m) = self.order {
            s.push_str(&format!("({m})"));
        }
        if self.data_filter == DataFilter::DaytimeOnly {
            s.push_str(" daytime");
        }
        if self.include_intercept {
            s.push_str(" +c");
        }
        s
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.include_intercept {
            names.push("intercept".to_string());
        }
        let m = self.order.unwrap_or(0);
        let cc_diffs = |names: &mut Vec<String>| {
            for i in 1..=m {
                names.push(format!("cc[t]-cc[t-{i}]"));
            }
            names.push("cc[t]-cc[t-24]".to_string());
        };
        match self.family {
            Family::Lr => {
                names.push("I[t-24]".into());
                names.push("cc[t]-cc[t-24]".into());
            }
            Family::Lmx => {
                names.extend((1..=m).map(|i| format!("I[t-{i}]")));
                names.push("I[t-24]".into());
                cc_diffs(&mut names);
            }
            Family::Ldmx => {
                names.extend((1..=m).map(|i| format!("I[t-{i}]-I[t-{}]", i + 1)));
                names.push("I[t-24]".into());
                cc_diffs(&mut names);
            }
            Family::Lmx2 | Family::Lmx2m => {
                for n in ["I[t-1]", "I[t-2]", "I[t-24]", "cc[t-1]", "cc[t-2]", "cc[t-24]", "cc[t]"] {
                    names.push(n.into());
                }
                names.extend((2..=24).map(|h| format!("time={h}")));
                if self.family == Family::Lmx2 {
                    names.extend((2..=12).map(|mo| format!("month={mo}")));
                }
            }
        }
        names
    }

    pub fn width(&self) -> usize {
        self.column_names().len()
    }

    /// Whether hour `t` belongs to this spec's scope and filter.
    pub fn admits(&self, series: &HourlySeries, t: usize) -> bool {
        if let Scope::Monthly(m) = self.scope {
            if series.timestamp(t).month() != m {
                return false;
            }
        }
        self.data_filter == DataFilter::AllHours || series.is_daytime(t)
    }
}

/// Supplies the current-hour cloud cover used as a regressor.
pub trait CloudCoverSource {
    fn current(&self, series: &HourlySeries, t: usize) -> Option<f64>;
}

/// Uses the observed cloud cover of the target hour.
#[derive(Debug, Clone, Copy, Default)]
pub struct ObservedCloudCover;

impl CloudCoverSource for ObservedCloudCover {
    fn current(&self, series: &HourlySeries, t: usize) -> Option<f64> {
        series.cloud_cover(t)
    }
}

/// Feature row for hour `t`. On failure returns the lag that was unavailable.
pub fn feature_row(
    series: &HourlySeries,
    spec: &DesignSpec,
    t: usize,
    cc_source: &dyn CloudCoverSource,
) -> std::result::Result<Vec<f64>, usize> {
    let irr = |lag: usize| -> std::result::Result<f64, usize> {
        if lag > t {
            return Err(lag);
        }
        series.irradiance(t - lag).ok_or(lag)
    };
    let cc = |lag: usize| -> std::result::Result<f64, usize> {
        if lag > t {
            return Err(lag);
        }
        series.cloud_cover(t - lag).ok_or(lag)
    };
    if t < SEASONAL_LAG {
        return Err(SEASONAL_LAG);
    }
    let cc_now = cc_source.current(series, t).ok_or(0usize)?;
    let m = spec.order.unwrap_or(0);

    let mut row = Vec::with_capacity(spec.width());
    if spec.include_intercept {
        row.push(1.0);
    }
    match spec.family {
        Family::Lr => {
            row.push(irr(24)?);
            row.push(cc_now - cc(24)?);
        }
        Family::Lmx | Family::Ldmx => {
            for i in 1..=m {
                row.push(if spec.family == Family::Lmx {
                    irr(i)?
                } else {
                    irr(i)? - irr(i + 1)?
                });
            }
            row.push(irr(24)?);
            for i in 1..=m {
                row.push(cc_now - cc(i)?);
            }
            row.push(cc_now - cc(24)?);
        }
        Family::Lmx2 | Family::Lmx2m => {
            row.extend([irr(1)?, irr(2)?, irr(24)?, cc(1)?, cc(2)?, cc(24)?, cc_now]);
            let hour = series.hour_index(t);
            row.extend((2..=24).map(|h| if h == hour { 1.0 } else { 0.0 }));
            if spec.family == Family::Lmx2 {
                let month = series.timestamp(t).month();
                row.extend((2..=12).map(|mo| if mo == month { 1.0 } else { 0.0 }));
            }
        }
    }
    Ok(row)
}

/// A built design matrix with the hour index of every row.
#[derive(Debug, Clone)]
pub struct Design {
    pub column_names: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub target: Vec<f64>,
    pub rows: Vec<usize>,
}

impl Design {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }
}

/// Builds the design over every admissible hour of the series.
pub fn build_design(series: &HourlySeries, spec: &DesignSpec) -> Result<Design> {
    build_design_on(series, spec, 0..series.len(), &ObservedCloudCover)
}

/// Builds the design over the given candidate hours. Hours outside the design's
/// scope or filter, without a target, or missing a lag are skipped.
pub fn build_design_on(
    series: &HourlySeries,
    spec: &DesignSpec,
    hours: impl IntoIterator<Item = usize>,
    cc_source: &dyn CloudCoverSource,
) -> Result<Design> {
    spec.validate()?;
    let column_names = spec.column_names();
    let width = column_names.len();
    let mut data = Vec::new();
    let mut target = Vec::new();
    let mut rows = Vec::new();
    for t in hours {
        if t >= series.len() || !spec.admits(series, t) {
            continue;
        }
        let Some(y) = series.irradiance(t) else {
            continue;
        };
        if let Ok(row) = feature_row(series, spec, t, cc_source) {
            data.extend(row);
            target.push(y);
            rows.push(t);
        }
    }
    if rows.is_empty() {
        let scope = match spec.scope {
            Scope::Annual => "annual".to_string(),
            Scope::Monthly(m) => format!("month {m}"),
        };
        return Err(Error::EmptyDesign(format!(
            "no usable rows for {} ({scope})",
            spec.label()
        )));
    }
    let matrix = DMatrix::from_row_slice(rows.len(), width, &data);
    Ok(Design {
        column_names,
        matrix,
        target,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::HourlyRecord;
    use crate::SiteLocation;
    use chrono::{Duration, NaiveDate};

    fn series(hours: usize) -> HourlySeries {
        let t0 = NaiveDate::from_ymd_opt(2013, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let recs = (0..hours)
            .map(|h| {
                HourlyRecord::observed(
                    t0 + Duration::hours(h as i64),
                    (h % 24) as f64 * 10.0,
                    ((h * 7) % 10) as f64 / 10.0,
                )
            })
            .collect();
        HourlySeries::new(SiteLocation::phoenix(), recs).unwrap()
    }

    #[test]
    fn lr_rows_need_day_old_lag() {
        let d = build_design(&series(48), &DesignSpec::lr(Scope::Annual)).unwrap();
        assert_eq!(d.rows, (24..48).collect::<Vec<_>>());
        assert_eq!(d.matrix.ncols(), 2);
    }

    #[test]
    fn column_counts() {
        assert_eq!(DesignSpec::lmx(2, Scope::Annual).width(), 6);
        assert_eq!(DesignSpec::lmx(2, Scope::Annual).with_intercept().width(), 7);
        assert_eq!(DesignSpec::ldmx(3, Scope::Annual).width(), 8);
        assert_eq!(DesignSpec::lmx2().width(), 41);
        assert_eq!(DesignSpec::lmx2m(4).width(), 30);
    }

    #[test]
    fn lmx_row_values() {
        let s = series(60);
        let spec = DesignSpec::lmx(2, Scope::Annual);
        let row = feature_row(&s, &spec, 30, &ObservedCloudCover).unwrap();
        let cc = |t: usize| s.cloud_cover(t).unwrap();
        let i = |t: usize| s.irradiance(t).unwrap();
        assert_eq!(
            row,
            vec![i(29), i(28), i(6), cc(30) - cc(29), cc(30) - cc(28), cc(30) - cc(6)]
        );
        let ld = feature_row(&s, &DesignSpec::ldmx(1, Scope::Annual), 30, &ObservedCloudCover).unwrap();
        assert_eq!(ld[0], i(29) - i(28));
    }

    #[test]
    fn dummy_encoding() {
        let s = series(24 * 40);
        let d = build_design(&s, &DesignSpec::lmx2()).unwrap();
        for (r, &t) in d.rows.iter().enumerate() {
            let row = d.row(r);
            let time = &row[7..30];
            let month = &row[30..41];
            assert!(time.iter().sum::<f64>() <= 1.0);
            assert!(month.iter().sum::<f64>() <= 1.0);
            if s.hour_index(t) == 1 {
                assert!(time.iter().all(|v| *v == 0.0));
            }
            if s.timestamp(t).month() == 1 {
                assert!(month.iter().all(|v| *v == 0.0));
            } else {
                assert_eq!(month[0], 1.0);
            }
        }
    }

    #[test]
    fn daytime_rows_are_subset() {
        let s = series(24 * 5);
        let all = build_design(&s, &DesignSpec::lmx(1, Scope::Annual)).unwrap();
        let day = build_design(&s, &DesignSpec::lmx(1, Scope::Annual).daytime()).unwrap();
        assert!(day.nrows() < all.nrows());
        for (r, t) in day.rows.iter().enumerate() {
            let k = all.rows.iter().position(|x| x == t).unwrap();
            assert_eq!(day.row(r), all.row(k));
            assert!(s.is_daytime(*t));
        }
        let night = all.rows.iter().filter(|t| !s.is_daytime(**t)).count();
        assert_eq!(day.nrows() + night, all.nrows());
    }

    #[test]
    fn empty_designs() {
        assert!(matches!(
            build_design(&series(20), &DesignSpec::lr(Scope::Annual)),
            Err(Error::EmptyDesign(_))
        ));
        assert!(matches!(
            build_design(&series(24 * 5), &DesignSpec::lr(Scope::Monthly(7))),
            Err(Error::EmptyDesign(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!(DesignSpec::lmx(5, Scope::Annual).validate().is_err());
        assert!(DesignSpec::lmx2().with_scope(Scope::Monthly(1)).validate().is_err());
        assert!(DesignSpec::lmx2m(1).with_scope(Scope::Annual).validate().is_err());
        assert!(DesignSpec::lr(Scope::Monthly(13)).validate().is_err());
    }
}
