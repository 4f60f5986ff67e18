//! Declarative model choices and fitted models behind one interface.

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::ann::{self, MlpConfig, MlpModel};
use crate::baseline;
use crate::linear::{self, DataFilter, DesignSpec, LinearModel, ObservedCloudCover, Scope};
use crate::sarima::{self, FitConfig, GridReport, OrderGrid, SarimaModel, SarimaOrder};
use crate::{Error, HourlySeries, Result};

/// Quantity a SARIMA model is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SarimaVariable {
    /// Irradiance, W/m².
    #[default]
    Irradiance,
    /// Clearness index; forecasts are converted back to irradiance.
    Clearness,
}

impl SarimaVariable {
    pub fn symbol(self) -> &'static str {
        match self {
            SarimaVariable::Irradiance => "I",
            SarimaVariable::Clearness => "k",
        }
    }

    /// The variable per hour; `None` where irradiance is missing.
    pub fn values(self, series: &HourlySeries) -> Vec<Option<f64>> {
        match self {
            SarimaVariable::Irradiance => (0..series.len()).map(|t| series.irradiance(t)).collect(),
            SarimaVariable::Clearness => series.clearness(),
        }
    }
}

/// What to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Same hour of the previous day.
    Baseline,
    /// A fixed SARIMA order, or the best order of a grid.
    Sarima {
        #[serde(default)]
        variable: SarimaVariable,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<SarimaOrder>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<OrderGrid>,
    },
    Linear(DesignSpec),
    /// Perceptron on the LMX2 inputs.
    Mlp {
        #[serde(default)]
        config: MlpConfig,
        #[serde(default)]
        data_filter: DataFilter,
    },
}

impl ModelSpec {
    pub fn sarima(order: SarimaOrder, variable: SarimaVariable) -> Self {
        ModelSpec::Sarima {
            variable,
            order: Some(order),
            grid: None,
        }
    }

    pub fn sarima_grid(grid: OrderGrid, variable: SarimaVariable) -> Self {
        ModelSpec::Sarima {
            variable,
            order: None,
            grid: Some(grid),
        }
    }

    pub fn mlp(config: MlpConfig, data_filter: DataFilter) -> Self {
        ModelSpec::Mlp {
            config,
            data_filter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Baseline => Ok(()),
            ModelSpec::Sarima { order, grid, .. } => match (order, grid) {
                (Some(o), None) => o.validate(),
                (None, Some(_)) => Ok(()),
                _ => Err(Error::Config(
                    "a SARIMA spec needs exactly one of `order` or `grid`".into(),
                )),
            },
            ModelSpec::Linear(d) => d.validate(),
            ModelSpec::Mlp { config, .. } => config.validate(),
        }
    }

    /// Name used in reports and file names. Monthly linear specs share one
    /// name across months.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Baseline => "Simple Forecast".into(),
            ModelSpec::Sarima {
                variable, order, ..
            } => match order {
                Some(o) => format!("SARIMA{o} {}", variable.symbol()),
                None => format!("SARIMA grid {}", variable.symbol()),
            },
            ModelSpec::Linear(d) => {
                let mut s = d.label();
                if matches!(d.scope, Scope::Monthly(_)) && d.family != linear::Family::Lmx2m {
                    s.push_str(" monthly");
                }
                s
            }
            ModelSpec::Mlp {
                config,
                data_filter,
            } => {
                let mut s = format!("ANN({})", config.hidden_units);
                if *data_filter == DataFilter::DaytimeOnly {
                    s.push_str(" daytime");
                }
                s
            }
        }
    }

    /// Month of a monthly-scoped linear spec.
    pub fn month(&self) -> Option<u32> {
        match self {
            ModelSpec::Linear(DesignSpec {
                scope: Scope::Monthly(m),
                ..
            }) => Some(*m),
            _ => None,
        }
    }

    /// The same spec restricted to `month`, when it is monthly-scoped.
    pub fn for_month(&self, month: u32) -> Self {
        match self {
            ModelSpec::Linear(d) if matches!(d.scope, Scope::Monthly(_)) => {
                ModelSpec::Linear(d.with_scope(Scope::Monthly(month)))
            }
            other => other.clone(),
        }
    }

    /// Fits on the given training hours.
    pub fn fit(&self, series: &HourlySeries, train: &[usize]) -> Result<FitOutput> {
        self.validate()?;
        match self {
            ModelSpec::Baseline => Ok(FitOutput::plain(FittedModel::Baseline)),
            ModelSpec::Sarima {
                variable,
                order,
                grid,
            } => {
                let values = longest_run(&variable.values(series), train);
                if values.len() < MIN_SARIMA_RUN {
                    return Err(Error::Config(format!(
                        "SARIMA needs {MIN_SARIMA_RUN} consecutive training hours, the longest run is {}; \
                         use a holdout, monthly or blocked k-fold split",
                        values.len()
                    )));
                }
                if let Some(order) = order {
                    let model = sarima::fit_css_with(&values, *order, &FitConfig::default())?.model;
                    return Ok(FitOutput::plain(FittedModel::Sarima {
                        variable: *variable,
                        model,
                    }));
                }
                let grid = grid.as_ref().expect("validated");
                let report = sarima::grid_search(&values, grid, &FitConfig::default())?;
                Ok(FitOutput {
                    model: FittedModel::Sarima {
                        variable: *variable,
                        model: report.best().model.clone(),
                    },
                    grid: Some(report),
                })
            }
            ModelSpec::Linear(d) => Ok(FitOutput::plain(FittedModel::Linear(linear::fit_on(
                series,
                d,
                train.iter().copied(),
            )?))),
            ModelSpec::Mlp {
                config,
                data_filter,
            } => {
                let design = linear::build_design_on(
                    series,
                    &mlp_design(*data_filter),
                    train.iter().copied(),
                    &ObservedCloudCover,
                )?;
                let model = ann::train(config, &design.matrix, &design.target)?;
                Ok(FitOutput::plain(FittedModel::Mlp {
                    data_filter: *data_filter,
                    model,
                }))
            }
        }
    }
}

/// Shortest stretch of consecutive training hours a SARIMA model is fit on.
pub const MIN_SARIMA_RUN: usize = 7 * 24;

/// The LMX2 design used as network input.
pub fn mlp_design(data_filter: DataFilter) -> DesignSpec {
    DesignSpec {
        data_filter,
        ..DesignSpec::lmx2()
    }
}

/// Values of the longest stretch of consecutive training hours with no
/// missing value.
fn longest_run(values: &[Option<f64>], train: &[usize]) -> Vec<f64> {
    let mut hours: Vec<usize> = train.iter().copied().filter(|&t| t < values.len()).collect();
    hours.sort_unstable();
    hours.dedup();
    let mut best: &[usize] = &[];
    let mut start = 0;
    for i in 0..=hours.len() {
        let breaks = i == hours.len()
            || values[hours[i]].is_none()
            || (i > start && hours[i] != hours[i - 1] + 1);
        if breaks {
            if i - start > best.len() {
                best = &hours[start..i];
            }
            start = if i < hours.len() && values[hours[i]].is_none() {
                i + 1
            } else {
                i
            };
        }
    }
    best.iter().filter_map(|&t| values[t]).collect()
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: FittedModel,
    /// Ranking of every order when a grid was searched.
    pub grid: Option<GridReport>,
}

impl FitOutput {
    fn plain(model: FittedModel) -> Self {
        Self { model, grid: None }
    }
}

/// A model ready to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Baseline,
    Sarima {
        variable: SarimaVariable,
        model: SarimaModel,
    },
    Linear(LinearModel),
    Mlp {
        data_filter: DataFilter,
        model: MlpModel,
    },
}

impl FittedModel {
    /// One-hour-ahead irradiance forecast for every requested hour, in order;
    /// `None` where the inputs are unavailable or, for a monthly linear model,
    /// the hour falls in another month.
    pub fn forecast_hours(&self, series: &HourlySeries, hours: &[usize]) -> Result<Vec<Option<f64>>> {
        match self {
            FittedModel::Baseline => Ok(hours
                .iter()
                .map(|&t| baseline::simple_forecast(series, t).ok())
                .collect()),
            FittedModel::Sarima { variable, model } => {
                let all = sarima_forecasts(model, &variable.values(series))?;
                Ok(hours
                    .iter()
                    .map(|&t| {
                        let v = all.get(t).copied().flatten()?;
                        Some(match variable {
                            SarimaVariable::Irradiance => v,
                            SarimaVariable::Clearness => v * series.i0(t),
                        })
                    })
                    .collect())
            }
            FittedModel::Linear(m) => Ok(hours
                .iter()
                .map(|&t| match m.spec.scope {
                    Scope::Monthly(month) if series.timestamp(t).month() != month => None,
                    _ => m.predict(series, t).ok(),
                })
                .collect()),
            FittedModel::Mlp { data_filter, model } => {
                let spec = mlp_design(*data_filter);
                hours
                    .iter()
                    .map(|&t| {
                        match linear::feature_row(series, &spec, t, &ObservedCloudCover) {
                            Ok(row) => model.forward(&row).map(Some),
                            Err(_) => Ok(None),
                        }
                    })
                    .collect()
            }
        }
    }

    /// Forecast for a single hour.
    pub fn forecast(&self, series: &HourlySeries, t: usize) -> Result<f64> {
        self.forecast_hours(series, &[t])?
            .pop()
            .flatten()
            .ok_or(Error::UnavailableLag { index: t, lag: 1 })
    }

    /// Full-precision text form.
    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// One-step forecasts over each stretch of consecutive present values.
fn sarima_forecasts(model: &SarimaModel, values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; values.len()];
    let mut t = 0;
    while t < values.len() {
        if values[t].is_none() {
            t += 1;
            continue;
        }
        let start = t;
        while t < values.len() && values[t].is_some() {
            t += 1;
        }
        let run: Vec<f64> = values[start..t].iter().map(|v| v.unwrap_or_default()).collect();
        for (i, f) in model.one_step_forecasts(&run)?.into_iter().enumerate() {
            out[start + i] = f;
        }
    }
    Ok(out)
}
