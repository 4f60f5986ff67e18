//! Cloud-cover regression models (LR, LMX, LDMX, LMX2, LMX2M) fit by least squares.

mod design;
pub mod ols;

use serde::{Deserialize, Serialize};

pub use design::{
    build_design, build_design_on, feature_row, CloudCoverSource, DataFilter, Design, DesignSpec,
    Family, ObservedCloudCover, Scope, SEASONAL_LAG,
};

use crate::{Error, HourlySeries, Result, MAX_IRRADIANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub spec: DesignSpec,
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub training_rmse: f64,
    pub training_mae: f64,
    pub training_n: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Limits a prediction to the feasible irradiance range.
pub fn clamp_irradiance(value: f64) -> f64 {
    value.clamp(0.0, MAX_IRRADIANCE)
}

/// Fits `spec` on every admissible hour of the series.
pub fn fit(series: &HourlySeries, spec: &DesignSpec) -> Result<LinearModel> {
    fit_design(&build_design(series, spec)?, spec)
}

/// Fits `spec` using only the candidate hours.
pub fn fit_on(
    series: &HourlySeries,
    spec: &DesignSpec,
    hours: impl IntoIterator<Item = usize>,
) -> Result<LinearModel> {
    fit_design(
        &build_design_on(series, spec, hours, &ObservedCloudCover)?,
        spec,
    )
}

fn is_indicator(name: &str) -> bool {
    name.starts_with("time=") || name.starts_with("month=")
}

/// Least-squares fit of a design already built for `spec`.
///
/// Hour or month indicators whose level never occurs in the rows (night
/// hours under the daytime filter, say) carry no information; they are left
/// out of the solve and get a zero coefficient.
pub fn fit_design(design: &Design, spec: &DesignSpec) -> Result<LinearModel> {
    let keep: Vec<usize> = (0..design.matrix.ncols())
        .filter(|&j| {
            !is_indicator(&design.column_names[j]) || design.matrix.column(j).iter().any(|v| *v != 0.0)
        })
        .collect();
    let coefficients = if keep.len() == design.matrix.ncols() {
        ols::solve(&design.matrix, &design.target, &design.column_names)?
    } else {
        let names: Vec<String> = keep.iter().map(|&j| design.column_names[j].clone()).collect();
        let reduced = design.matrix.select_columns(&keep);
        let solved = ols::solve(&reduced, &design.target, &names)?;
        let mut full = vec![0.0; design.matrix.ncols()];
        for (j, b) in keep.into_iter().zip(solved) {
            full[j] = b;
        }
        full
    };
    let mut model = LinearModel {
        spec: *spec,
        column_names: design.column_names.clone(),
        coefficients,
        training_rmse: 0.0,
        training_mae: 0.0,
        training_n: design.nrows(),
    };
    let fitted = model.fitted_values(design);
    let n = fitted.len() as f64;
    let (sq, abs) = fitted
        .iter()
        .zip(&design.target)
        .fold((0.0, 0.0), |(sq, abs), (f, y)| {
            (sq + (y - f).powi(2), abs + (y - f).abs())
        });
    model.training_rmse = (sq / n).sqrt();
    model.training_mae = abs / n;
    Ok(model)
}

impl LinearModel {
    pub fn label(&self) -> String {
        self.spec.label()
    }

    /// Unclamped `matrix · coefficients` for every design row.
    pub fn fitted_values(&self, design: &Design) -> Vec<f64> {
        (0..design.nrows())
            .map(|i| dot(&design.row(i), &self.coefficients))
            .collect()
    }

    /// Unclamped prediction for hour `t` with a custom cloud-cover source.
    pub fn predict_raw_with(
        &self,
        series: &HourlySeries,
        t: usize,
        cc_source: &dyn CloudCoverSource,
    ) -> Result<f64> {
        let row = feature_row(series, &self.spec, t, cc_source)
            .map_err(|lag| Error::UnavailableLag { index: t, lag })?;
        Ok(dot(&row, &self.coefficients))
    }

    pub fn predict_raw(&self, series: &HourlySeries, t: usize) -> Result<f64> {
        self.predict_raw_with(series, t, &ObservedCloudCover)
    }

    /// Prediction for hour `t`, clamped to [0, 1050] W/m².
    pub fn predict(&self, series: &HourlySeries, t: usize) -> Result<f64> {
        self.predict_raw(series, t).map(clamp_irradiance)
    }

    /// Predicts hours `start..start + horizon` independently from day-old
    /// observations. Only the LR family supports this.
    pub fn multi_hour_predict(
        &self,
        series: &HourlySeries,
        start: usize,
        horizon: usize,
    ) -> Result<Vec<f64>> {
        if self.spec.family != Family::Lr {
            return Err(Error::Config(format!(
                "multi-hour prediction needs an LR model, got {}",
                self.spec.family.as_str()
            )));
        }
        (start..start + horizon)
            .map(|t| self.predict(series, t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::simple_forecast;
    use crate::series::HourlyRecord;
    use crate::SiteLocation;
    use chrono::{Duration, NaiveDate};

    fn series(hours: usize, irr: impl Fn(usize) -> f64, cc: impl Fn(usize) -> f64) -> HourlySeries {
        let t0 = NaiveDate::from_ymd_opt(2013, 3, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let recs = (0..hours)
            .map(|h| HourlyRecord::observed(t0 + Duration::hours(h as i64), irr(h), cc(h)))
            .collect();
        HourlySeries::new(SiteLocation::phoenix(), recs).unwrap()
    }

    fn wobbly(h: usize) -> f64 {
        let x = h as f64;
        (400.0 * (x * 0.2618).sin()).max(0.0) + 30.0 * (x * 1.3).cos().abs()
    }

    fn jumbled(h: usize) -> f64 {
        ((h as u64).wrapping_mul(2_654_435_761) >> 8 & 1023) as f64 / 1023.0
    }

    fn lr_model(beta: f64, alpha: f64) -> LinearModel {
        LinearModel {
            spec: DesignSpec::lr(Scope::Annual),
            column_names: DesignSpec::lr(Scope::Annual).column_names(),
            coefficients: vec![beta, alpha],
            training_rmse: 0.0,
            training_mae: 0.0,
            training_n: 0,
        }
    }

    #[test]
    fn unit_lr_is_persistence() {
        let s = series(24 * 4, wobbly, |h| (h % 5) as f64 / 5.0);
        let m = lr_model(1.0, 0.0);
        for t in 24..s.len() {
            assert_eq!(m.predict(&s, t).unwrap(), simple_forecast(&s, t).unwrap());
        }
    }

    #[test]
    fn clamps() {
        let s = series(48, |_| 15.0, |_| 0.5);
        assert_eq!(lr_model(-1.0, 0.0).predict(&s, 30).unwrap(), 0.0);
        assert_eq!(lr_model(-1.0, 0.0).predict_raw(&s, 30).unwrap(), -15.0);
        assert_eq!(lr_model(100.0, 0.0).predict(&s, 30).unwrap(), 1050.0);
    }

    #[test]
    fn predict_matches_fitted_rows() {
        let s = series(24 * 10, wobbly, jumbled);
        let spec = DesignSpec::lmx(2, Scope::Annual);
        let design = build_design(&s, &spec).unwrap();
        let model = fit_design(&design, &spec).unwrap();
        let fitted = model.fitted_values(&design);
        for (i, &t) in design.rows.iter().enumerate() {
            assert_eq!(model.predict_raw(&s, t).unwrap(), fitted[i]);
        }
    }

    #[test]
    fn nested_models_do_not_lose_fit() {
        let s = series(24 * 15, wobbly, jumbled);
        let rows: Vec<usize> = build_design(&s, &DesignSpec::lmx(3, Scope::Annual))
            .unwrap()
            .rows;
        let mut prev = f64::INFINITY;
        for m in 1..=3 {
            let fit = fit_on(&s, &DesignSpec::lmx(m, Scope::Annual), rows.iter().copied()).unwrap();
            assert_eq!(fit.training_n, rows.len());
            assert!(fit.training_rmse <= prev + 1e-9);
            prev = fit.training_rmse;
        }
    }

    #[test]
    fn multi_hour() {
        let s = series(24 * 3, |_| 500.0, |_| 0.3);
        let spec = DesignSpec::lr(Scope::Annual);
        let model = lr_model(0.9, 40.0);
        let seq = model.multi_hour_predict(&s, 40, 4).unwrap();
        assert!(seq.iter().all(|v| (v - seq[0]).abs() < 1e-9));
        assert_eq!(model.multi_hour_predict(&s, 40, 1).unwrap()[0], model.predict(&s, 40).unwrap());

        let s = series(24 * 6, wobbly, jumbled);
        let model = fit(&s, &spec).unwrap();
        let independent: Vec<f64> = (50..54).map(|t| model.predict(&s, t).unwrap()).collect();
        assert_eq!(model.multi_hour_predict(&s, 50, 4).unwrap(), independent);

        let lmx = fit(&s, &DesignSpec::lmx(1, Scope::Annual)).unwrap();
        assert!(lmx.multi_hour_predict(&s, 50, 2).is_err());
    }

    #[test]
    fn missing_lag_reported() {
        let s = series(48, |_| 1.0, |_| 0.1);
        assert!(matches!(
            lr_model(1.0, 0.0).predict(&s, 10),
            Err(Error::UnavailableLag { index: 10, lag: 24 })
        ));
    }

    #[test]
    fn absent_hour_levels_get_zero() {
        let s = series(24 * 30, wobbly, jumbled);
        let spec = DesignSpec::lmx2m(3).daytime();
        let design = build_design(&s, &spec).unwrap();
        let model = fit_design(&design, &spec).unwrap();
        let midnight = model.column_names.iter().position(|c| c == "time=2").unwrap();
        assert!(design.matrix.column(midnight).iter().all(|v| *v == 0.0));
        assert_eq!(model.coefficients[midnight], 0.0);
        assert!(model.coefficients.iter().all(|b| b.is_finite()));
    }

    #[test]
    fn toml_round_trip() {
        let s = series(24 * 6, wobbly, jumbled);
        let model = fit(&s, &DesignSpec::ldmx(2, Scope::Annual).daytime()).unwrap();
        let text = toml::to_string(&model).unwrap();
        let back: LinearModel = toml::from_str(&text).unwrap();
        assert_eq!(back, model);
    }
}
