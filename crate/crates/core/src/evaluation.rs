//! Daytime error metrics, train/test split protocols and model comparison
//! reports.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::Datelike;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::ModelSpec;
use crate::series::TIMESTAMP_FORMAT;
use crate::{Error, HourlySeries, Result};

/// Error metrics over the evaluated (daytime) hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub rmse: f64,
    /// RMSE over the mean observed value.
    pub cvrmse: f64,
    /// `1 - SSE/SST`; `None` when the observations have no spread.
    pub r2: Option<f64>,
    pub n_hours: usize,
}

impl MetricSet {
    /// Plain average of each metric; hour counts are summed.
    pub fn average(sets: &[MetricSet]) -> Result<MetricSet> {
        if sets.is_empty() {
            return Err(Error::EmptyEvaluation);
        }
        let n = sets.len() as f64;
        let mean = |f: fn(&MetricSet) -> f64| sets.iter().map(f).sum::<f64>() / n;
        let r2 = sets
            .iter()
            .map(|s| s.r2)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        Ok(MetricSet {
            mae: mean(|s| s.mae),
            rmse: mean(|s| s.rmse),
            cvrmse: mean(|s| s.cvrmse),
            r2,
            n_hours: sets.iter().map(|s| s.n_hours).sum(),
        })
    }
}

/// Metrics of `predicted` against `observed` over the hours where `daytime`
/// is set. Predictions must already be irradiance.
pub fn compute_metrics(predicted: &[f64], observed: &[f64], daytime: &[bool]) -> Result<MetricSet> {
    if predicted.len() != observed.len() {
        return Err(Error::Shape {
            expected: observed.len(),
            actual: predicted.len(),
        });
    }
    if daytime.len() != observed.len() {
        return Err(Error::Shape {
            expected: observed.len(),
            actual: daytime.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = predicted
        .iter()
        .zip(observed)
        .zip(daytime)
        .filter(|(_, d)| **d)
        .map(|((p, o), _)| (*p, *o))
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = pairs.len() as f64;
    let mean_obs = pairs.iter().map(|(_, o)| o).sum::<f64>() / n;
    let sse: f64 = pairs.iter().map(|(p, o)| (o - p).powi(2)).sum();
    let sae: f64 = pairs.iter().map(|(p, o)| (o - p).abs()).sum();
    let sst: f64 = pairs.iter().map(|(_, o)| (o - mean_obs).powi(2)).sum();
    if mean_obs == 0.0 {
        return Err(Error::UndefinedCvrmse);
    }
    let rmse = (sse / n).sqrt();
    let mae = sae / n;
    debug_assert!(mae <= rmse * (1.0 + 1e-12) + 1e-12);
    Ok(MetricSet {
        mae,
        rmse,
        cvrmse: rmse / mean_obs,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        n_hours: pairs.len(),
    })
}

/// Irradiance implied by a clearness forecast.
pub fn clearness_to_irradiance(k: f64, i0: f64) -> f64 {
    k * i0
}

/// One train/test partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub label: String,
    /// Calendar month the fold is restricted to, for monthly protocols.
    pub month: Option<u32>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    HoldoutYears { train_years: Vec<i32>, test_year: i32 },
    /// Days 1-21 of each month train, the rest of the month tests.
    Monthly3w1w { months: Vec<u32> },
    Kfold { k: usize, seed: u64, blocked: bool },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn describe(&self) -> String {
        match &self.kind {
            SplitKind::HoldoutYears {
                train_years,
                test_year,
            } => {
                let years: Vec<String> = train_years.iter().map(|y| y.to_string()).collect();
                format!("holdout: train {} / test {test_year}", years.join(","))
            }
            SplitKind::Monthly3w1w { months } => {
                format!("monthly 3 weeks / 1 week over {} months", months.len())
            }
            SplitKind::Kfold { k, seed, blocked } => {
                let how = if *blocked { "blocked" } else { "shuffled" };
                format!("{k}-fold cross-validation ({how}, seed {seed})")
            }
        }
    }

    fn is_monthly(&self) -> bool {
        self.folds.iter().all(|f| f.month.is_some())
    }
}

/// Train on whole calendar years, test on another.
pub fn split_holdout_years(series: &HourlySeries, train_years: &[i32], test_year: i32) -> Result<SplitPlan> {
    let present: BTreeSet<i32> = (0..series.len()).map(|t| series.ymd(t).0).collect();
    for y in train_years.iter().chain([&test_year]) {
        if !present.contains(y) {
            return Err(Error::Coverage(format!("year {y} not in series")));
        }
    }
    if train_years.contains(&test_year) {
        return Err(Error::Config(format!("year {test_year} is both train and test")));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for t in 0..series.len() {
        let y = series.ymd(t).0;
        if y == test_year {
            test.push(t);
        } else if train_years.contains(&y) {
            train.push(t);
        }
    }
    Ok(SplitPlan {
        kind: SplitKind::HoldoutYears {
            train_years: train_years.to_vec(),
            test_year,
        },
        folds: vec![Fold {
            label: "holdout".into(),
            month: None,
            train,
            test,
        }],
    })
}

/// Last day of the month used for training.
pub const TRAIN_LAST_DAY: u32 = 21;

fn month_fold(series: &HourlySeries, month: u32) -> Result<Fold> {
    if !(1..=12).contains(&month) {
        return Err(Error::Config(format!("month {month} outside 1..=12")));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    let mut days = BTreeSet::new();
    for t in 0..series.len() {
        let (_, m, d) = series.ymd(t);
        if m != month {
            continue;
        }
        if series.irradiance(t).is_some() {
            days.insert(d);
        }
        if d <= TRAIN_LAST_DAY {
            train.push(t);
        } else {
            test.push(t);
        }
    }
    if days.len() < 22 || !days.iter().any(|d| *d > TRAIN_LAST_DAY) {
        return Err(Error::Coverage(format!(
            "month {month} has data on {} days; need at least 22 including a test day",
            days.len()
        )));
    }
    Ok(Fold {
        label: format!("month={month:02}"),
        month: Some(month),
        train,
        test,
    })
}

/// Single-month three-weeks/one-week split.
pub fn split_monthly_3w1w(series: &HourlySeries, month: u32) -> Result<SplitPlan> {
    Ok(SplitPlan {
        kind: SplitKind::Monthly3w1w {
            months: vec![month],
        },
        folds: vec![month_fold(series, month)?],
    })
}

/// Three-weeks/one-week split for every month that has any data.
pub fn split_monthly_all(series: &HourlySeries) -> Result<SplitPlan> {
    let months: BTreeSet<u32> = (0..series.len()).map(|t| series.ymd(t).1).collect();
    let folds = months
        .iter()
        .map(|&m| month_fold(series, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitPlan {
        kind: SplitKind::Monthly3w1w {
            months: months.into_iter().collect(),
        },
        folds,
    })
}

fn chunk_folds(order: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = order.len();
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        out.push(order[at..at + size].to_vec());
        at += size;
    }
    out
}

fn kfold_plan(rows: &[usize], k: usize, seed: u64, blocked: bool) -> Result<SplitPlan> {
    if k < 2 || rows.len() < k {
        return Err(Error::FoldSize { rows: rows.len(), k });
    }
    let mut order = rows.to_vec();
    if blocked {
        order.sort_unstable();
    } else {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let chunks = chunk_folds(&order, k);
    let folds = chunks
        .iter()
        .enumerate()
        .map(|(i, test)| {
            let mut test = test.clone();
            test.sort_unstable();
            let mut train: Vec<usize> = chunks
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, c)| c.iter().copied())
                .collect();
            train.sort_unstable();
            Fold {
                label: format!("fold={:02}", i + 1),
                month: None,
                train,
                test,
            }
        })
        .collect();
    Ok(SplitPlan {
        kind: SplitKind::Kfold { k, seed, blocked },
        folds,
    })
}

/// Seeded random permutation of `rows` cut into `k` near-equal chunks.
pub fn kfold(rows: &[usize], k: usize, seed: u64) -> Result<SplitPlan> {
    kfold_plan(rows, k, seed, false)
}

/// `k` contiguous chunks of `rows` in time order.
pub fn kfold_blocked(rows: &[usize], k: usize) -> Result<SplitPlan> {
    kfold_plan(rows, k, 0, true)
}

/// Declarative split choice, resolved against a series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitConfig {
    Holdout {
        train_years: Vec<i32>,
        test_year: i32,
    },
    Monthly {
        /// Every month with data when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        months: Option<Vec<u32>>,
    },
    Kfold {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        blocked: bool,
    },
}

fn default_k() -> usize {
    10
}

impl SplitConfig {
    pub fn build(&self, series: &HourlySeries) -> Result<SplitPlan> {
        match self {
            SplitConfig::Holdout {
                train_years,
                test_year,
            } => split_holdout_years(series, train_years, *test_year),
            SplitConfig::Monthly { months: None } => split_monthly_all(series),
            SplitConfig::Monthly { months: Some(ms) } => Ok(SplitPlan {
                kind: SplitKind::Monthly3w1w { months: ms.clone() },
                folds: ms
                    .iter()
                    .map(|&m| month_fold(series, m))
                    .collect::<Result<_>>()?,
            }),
            SplitConfig::Kfold { k, seed, blocked } => {
                let rows: Vec<usize> = (0..series.len()).collect();
                kfold_plan(&rows, *k, *seed, *blocked)
            }
        }
    }

    /// Replaces the seed of a k-fold split.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            SplitConfig::Kfold { k, blocked, .. } => SplitConfig::Kfold { k, seed, blocked },
            other => other,
        }
    }
}

/// One forecast hour of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub hour: usize,
    pub observed: f64,
    pub predicted: f64,
    pub daytime: bool,
}

/// Results of one model under one split plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub name: String,
    pub spec: ModelSpec,
    /// Metrics per split cell (`holdout`, `cv`, `month=MM`, `average`).
    pub cells: BTreeMap<String, MetricSet>,
    /// Every predicted test hour, in time order.
    pub predictions: Vec<Prediction>,
}

/// Label of the cell that summarizes a model.
pub const AVERAGE_CELL: &str = "average";

impl ModelEvaluation {
    /// The `average` cell when present, otherwise the only cell.
    pub fn summary(&self) -> Option<&MetricSet> {
        self.cells
            .get(AVERAGE_CELL)
            .or_else(|| (self.cells.len() == 1).then(|| self.cells.values().next()).flatten())
    }

    /// Writes `timestamp,observed,predicted,residual,daytime` rows.
    pub fn write_residuals<W: Write>(&self, series: &HourlySeries, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "observed", "predicted", "residual", "daytime"])?;
        for p in &self.predictions {
            w.write_record([
                series.timestamp(p.hour).format(TIMESTAMP_FORMAT).to_string(),
                p.observed.to_string(),
                p.predicted.to_string(),
                (p.observed - p.predicted).to_string(),
                u8::from(p.daytime).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Task {
    cell: String,
    spec: ModelSpec,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn tasks(series: &HourlySeries, spec: &ModelSpec, plan: &SplitPlan) -> Vec<Task> {
    if plan.is_monthly() {
        return plan
            .folds
            .iter()
            .map(|f| {
                let m = f.month.expect("monthly plan");
                Task {
                    cell: f.label.clone(),
                    spec: spec.for_month(m),
                    train: f.train.clone(),
                    test: f.test.clone(),
                }
            })
            .collect();
    }
    if spec.month().is_some() {
        let months: BTreeSet<u32> = plan
            .folds
            .iter()
            .flat_map(|f| f.test.iter().map(|&t| series.timestamp(t).month()))
            .collect();
        let in_month = |hours: &[usize], m: u32| -> Vec<usize> {
            hours
                .iter()
                .copied()
                .filter(|&t| series.timestamp(t).month() == m)
                .collect()
        };
        return months
            .into_iter()
            .flat_map(|m| {
                plan.folds.iter().map(move |f| Task {
                    cell: format!("month={m:02}"),
                    spec: spec.for_month(m),
                    train: in_month(&f.train, m),
                    test: in_month(&f.test, m),
                })
            })
            .collect();
    }
    let cell = if plan.folds.len() == 1 {
        plan.folds[0].label.clone()
    } else {
        "cv".to_string()
    };
    plan.folds
        .iter()
        .map(|f| Task {
            cell: cell.clone(),
            spec: spec.clone(),
            train: f.train.clone(),
            test: f.test.clone(),
        })
        .collect()
}

fn run_task(series: &HourlySeries, task: &Task) -> Result<Vec<Prediction>> {
    let fitted = task.spec.fit(series, &task.train)?.model;
    let forecasts = fitted.forecast_hours(series, &task.test)?;
    Ok(task
        .test
        .iter()
        .zip(forecasts)
        .filter_map(|(&t, f)| {
            Some(Prediction {
                hour: t,
                observed: series.irradiance(t)?,
                predicted: f?,
                daytime: series.is_daytime(t),
            })
        })
        .collect())
}

/// Fits and scores one model under a split plan.
///
/// Out-of-fold predictions are pooled per cell before scoring. A monthly
/// plan yields one cell per month; monthly-scoped linear specs under other
/// plans are fit separately for every month that has test hours. Whenever
/// there is more than one cell an `average` cell is added.
pub fn evaluate_model(series: &HourlySeries, spec: &ModelSpec, plan: &SplitPlan) -> Result<ModelEvaluation> {
    spec.validate()?;
    let tasks = tasks(series, spec, plan);
    let results: Vec<Result<Vec<Prediction>>> = tasks.par_iter().map(|t| run_task(series, t)).collect();

    let mut by_cell: BTreeMap<String, Vec<Prediction>> = BTreeMap::new();
    for (task, res) in tasks.iter().zip(results) {
        let preds = res.map_err(|e| annotate(e, &task.cell))?;
        by_cell.entry(task.cell.clone()).or_default().extend(preds);
    }
    let mut cells = BTreeMap::new();
    let mut predictions = Vec::new();
    for (cell, preds) in by_cell {
        let predicted: Vec<f64> = preds.iter().map(|p| p.predicted).collect();
        let observed: Vec<f64> = preds.iter().map(|p| p.observed).collect();
        let daytime: Vec<bool> = preds.iter().map(|p| p.daytime).collect();
        let m = compute_metrics(&predicted, &observed, &daytime).map_err(|e| annotate(e, &cell))?;
        cells.insert(cell, m);
        predictions.extend(preds);
    }
    if cells.len() > 1 {
        let all: Vec<MetricSet> = cells.values().copied().collect();
        cells.insert(AVERAGE_CELL.to_string(), MetricSet::average(&all)?);
    }
    predictions.sort_by_key(|p| p.hour);
    Ok(ModelEvaluation {
        name: spec.label(),
        spec: spec.clone(),
        cells,
        predictions,
    })
}

fn annotate(e: Error, cell: &str) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{cell}: {msg}")),
        other => Error::Config(format!("{cell}: {other}")),
    }
}

/// Comparison of several models under one split plan.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub plan: String,
    /// Successful evaluations, ordered by name.
    pub evaluations: Vec<ModelEvaluation>,
    /// Models that failed, with the reason.
    pub failures: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    plan: &'a str,
    models: BTreeMap<&'a str, &'a BTreeMap<String, MetricSet>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    failures: &'a BTreeMap<String, String>,
}

impl EvalReport {
    pub fn get(&self, name: &str) -> Option<&ModelEvaluation> {
        self.evaluations.iter().find(|e| e.name == name)
    }

    /// `{plan, models: {model: {cell: metrics}}, failures}` as pretty JSON.
    pub fn to_json(&self) -> Result<String> {
        let view = ReportJson {
            plan: &self.plan,
            models: self
                .evaluations
                .iter()
                .map(|e| (e.name.as_str(), &e.cells))
                .collect(),
            failures: &self.failures,
        };
        serde_json::to_string_pretty(&view).map_err(|e| Error::Serialize(e.to_string()))
    }

    /// Aligned plain-text table, one row per model and cell.
    pub fn to_text(&self) -> String {
        let width = self
            .evaluations
            .iter()
            .map(|e| e.name.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = format!("# {}\n", self.plan);
        out.push_str(&format!(
            "{:<width$}  {:<9} {:>7} {:>10} {:>10} {:>8} {:>8}\n",
            "model", "split", "n_hours", "MAE", "RMSE", "CVRMSE", "R2"
        ));
        for e in &self.evaluations {
            for (cell, m) in &e.cells {
                let r2 = m.r2.map_or("-".to_string(), |v| format!("{v:.4}"));
                out.push_str(&format!(
                    "{:<width$}  {:<9} {:>7} {:>10.3} {:>10.3} {:>8.4} {:>8}\n",
                    e.name, cell, m.n_hours, m.mae, m.rmse, m.cvrmse, r2
                ));
            }
        }
        for (name, reason) in &self.failures {
            out.push_str(&format!("{name:<width$}  failed: {reason}\n"));
        }
        out
    }
}

/// Evaluates every spec, plus the simple forecast, under one plan.
///
/// Models run concurrently; the report is ordered by model name. Models that
/// fail are listed under `failures` and do not stop the others. Duplicate
/// names get a `#n` suffix.
pub fn compare_models(series: &HourlySeries, specs: &[ModelSpec], plan: &SplitPlan) -> EvalReport {
    let mut all: Vec<ModelSpec> = Vec::with_capacity(specs.len() + 1);
    if !specs.contains(&ModelSpec::Baseline) {
        all.push(ModelSpec::Baseline);
    }
    all.extend(specs.iter().cloned());

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let names: Vec<String> = all
        .iter()
        .map(|s| {
            let base = s.label();
            let n = seen.entry(base.clone()).or_default();
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base} #{n}")
            }
        })
        .collect();

    let results: Vec<Result<ModelEvaluation>> = all
        .par_iter()
        .map(|spec| evaluate_model(series, spec, plan))
        .collect();
    let mut evaluations = Vec::new();
    let mut failures = BTreeMap::new();
    for (name, res) in names.into_iter().zip(results) {
        match res {
            Ok(mut e) => {
                e.name = name;
                evaluations.push(e);
            }
            Err(err) => {
                failures.insert(name, err.to_string());
            }
        }
    }
    evaluations.sort_by(|a, b| a.name.cmp(&b.name));
    EvalReport {
        plan: plan.describe(),
        evaluations,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::HourlyRecord;
    use crate::SiteLocation;
    use chrono::{Duration, NaiveDate, NaiveDateTime};
    use proptest::prelude::*;

    fn start(y: i32, m: u32, d: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    fn series_from(t0: NaiveDateTime, hours: usize) -> HourlySeries {
        let recs = (0..hours)
            .map(|h| {
                HourlyRecord::observed(
                    t0 + Duration::hours(h as i64),
                    ((h * 31) % 500) as f64,
                    ((h as u64).wrapping_mul(2_654_435_761) >> 8 & 1023) as f64 / 1023.0,
                )
            })
            .collect();
        HourlySeries::new(SiteLocation::phoenix(), recs).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let obs = [120.0, 300.0, 40.0];
        let m = compute_metrics(&obs, &obs, &[true; 3]).unwrap();
        assert_eq!((m.mae, m.rmse, m.cvrmse, m.r2), (0.0, 0.0, 0.0, Some(1.0)));
    }

    #[test]
    fn three_point_example() {
        let m = compute_metrics(&[110.0, 190.0, 330.0], &[100.0, 200.0, 300.0], &[true; 3]).unwrap();
        assert!((m.mae - 50.0 / 3.0).abs() < 1e-10);
        assert!((m.rmse - (1100.0f64 / 3.0).sqrt()).abs() < 1e-10);
        assert!((m.cvrmse - (1100.0f64 / 3.0).sqrt() / 200.0).abs() < 1e-10);
        assert!((m.r2.unwrap() - 0.945).abs() < 1e-10);
        assert_eq!(m.n_hours, 3);
    }

    #[test]
    fn night_hours_ignored() {
        let pred = [110.0, 999.0, 190.0, -50.0, 330.0];
        let obs = [100.0, 0.0, 200.0, 0.0, 300.0];
        let mask = [true, false, true, false, true];
        let a = compute_metrics(&pred, &obs, &mask).unwrap();
        let b = compute_metrics(&[110.0, 190.0, 330.0], &[100.0, 200.0, 300.0], &[true; 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(
            compute_metrics(&[1.0], &[1.0], &[false]),
            Err(Error::EmptyEvaluation)
        ));
        assert!(matches!(
            compute_metrics(&[1.0, 2.0], &[0.0, 0.0], &[true, true]),
            Err(Error::UndefinedCvrmse)
        ));
        assert!(compute_metrics(&[1.0], &[1.0, 2.0], &[true]).is_err());
        assert_eq!(compute_metrics(&[3.0], &[5.0], &[true]).unwrap().r2, None);
    }

    #[test]
    fn averaging() {
        let a = compute_metrics(&[1.0, 2.0], &[2.0, 2.0], &[true; 2]).unwrap();
        let b = compute_metrics(&[4.0, 2.0], &[2.0, 2.0], &[true; 2]).unwrap();
        let avg = MetricSet::average(&[a, b]).unwrap();
        assert_eq!(avg.mae, (a.mae + b.mae) / 2.0);
        assert_eq!(avg.n_hours, 4);
        assert!(MetricSet::average(&[]).is_err());
    }

    #[test]
    fn kfold_sizes() {
        let rows: Vec<usize> = (0..100).collect();
        let plan = kfold(&rows, 10, 3).unwrap();
        assert!(plan.folds.iter().all(|f| f.test.len() == 10 && f.train.len() == 90));
        let rows: Vec<usize> = (0..103).collect();
        let mut sizes: Vec<usize> = kfold(&rows, 10, 3).unwrap().folds.iter().map(|f| f.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [10, 10, 10, 10, 10, 10, 10, 11, 11, 11]);
        assert_eq!(kfold(&rows, 10, 3).unwrap(), kfold(&rows, 10, 3).unwrap());
        assert_ne!(kfold(&rows, 10, 3).unwrap(), kfold(&rows, 10, 4).unwrap());
        assert!(matches!(kfold(&rows[..5], 10, 0), Err(Error::FoldSize { rows: 5, k: 10 })));
    }

    #[test]
    fn blocked_folds_are_contiguous() {
        let rows: Vec<usize> = (0..50).collect();
        for f in kfold_blocked(&rows, 5).unwrap().folds {
            assert!(f.test.windows(2).all(|w| w[1] == w[0] + 1));
        }
    }

    #[test]
    fn monthly_split_days() {
        let s = series_from(start(2013, 2, 1), 28 * 24);
        let plan = split_monthly_3w1w(&s, 2).unwrap();
        let f = &plan.folds[0];
        assert_eq!(f.train.len(), 21 * 24);
        assert_eq!(f.test.len(), 7 * 24);
        assert_eq!(s.ymd(f.test[0]).2, 22);

        let s = series_from(start(2013, 3, 1), 31 * 24);
        assert_eq!(split_monthly_3w1w(&s, 3).unwrap().folds[0].test.len(), 10 * 24);

        let s = series_from(start(2013, 3, 1), 20 * 24);
        assert!(matches!(split_monthly_3w1w(&s, 3), Err(Error::Coverage(_))));
    }

    #[test]
    fn holdout_years() {
        let s = series_from(start(2012, 12, 30), 96);
        let plan = split_holdout_years(&s, &[2012], 2013).unwrap();
        assert_eq!(plan.folds[0].train.len(), 48);
        assert_eq!(plan.folds[0].test.len(), 48);
        assert!(matches!(split_holdout_years(&s, &[2012], 2014), Err(Error::Coverage(_))));
    }

    #[test]
    fn baseline_independent_of_company() {
        let s = series_from(start(2013, 1, 1), 24 * 59);
        let plan = split_monthly_all(&s).unwrap();
        let alone = compare_models(&s, &[], &plan);
        let crowded = compare_models(
            &s,
            &[ModelSpec::Linear(crate::linear::DesignSpec::lr(crate::linear::Scope::Monthly(1)))],
            &plan,
        );
        assert_eq!(
            alone.get("Simple Forecast").unwrap(),
            crowded.get("Simple Forecast").unwrap()
        );
        assert_eq!(alone.evaluations.len(), 1);
    }

    #[test]
    fn duplicate_baselines_match() {
        let s = series_from(start(2013, 1, 1), 24 * 30);
        let plan = kfold(&(0..s.len()).collect::<Vec<_>>(), 5, 1).unwrap();
        let r = compare_models(&s, &[ModelSpec::Baseline, ModelSpec::Baseline], &plan);
        assert_eq!(r.evaluations.len(), 2);
        assert_eq!(r.evaluations[0].cells, r.evaluations[1].cells);
        assert!(r.to_json().unwrap().contains("\"n_hours\""));
    }

    #[test]
    fn residual_rows_cover_predictions() {
        let s = series_from(start(2013, 1, 1), 24 * 10);
        let plan = kfold(&(0..s.len()).collect::<Vec<_>>(), 4, 9).unwrap();
        let e = evaluate_model(&s, &ModelSpec::Baseline, &plan).unwrap();
        assert_eq!(e.predictions.len(), s.len() - 24);
        let day = e.predictions.iter().filter(|p| p.daytime).count();
        assert_eq!(e.cells["cv"].n_hours, day);
        let mut buf = Vec::new();
        e.write_residuals(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), e.predictions.len() + 1);
        assert!(text.starts_with("timestamp,observed,predicted,residual,daytime\n"));
    }

    proptest! {
        #[test]
        fn mae_not_above_rmse(pairs in prop::collection::vec((0.0..1050.0f64, 1.0..1050.0f64), 1..200)) {
            let (p, o): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = compute_metrics(&p, &o, &vec![true; p.len()]).unwrap();
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
            let mean = o.iter().sum::<f64>() / o.len() as f64;
            prop_assert!((m.cvrmse * mean - m.rmse).abs() <= 1e-12 * m.rmse.max(1e-300));
            if let Some(r2) = m.r2 {
                prop_assert!(r2 <= 1.0);
            }
        }

        #[test]
        fn order_invariant(pairs in prop::collection::vec((0.0..1050.0f64, 1.0..1050.0f64), 2..100), seed in 0u64..1000) {
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (p, o): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (ps, os): (Vec<f64>, Vec<f64>) = shuffled.into_iter().unzip();
            let a = compute_metrics(&p, &o, &vec![true; p.len()]).unwrap();
            let b = compute_metrics(&ps, &os, &vec![true; ps.len()]).unwrap();
            prop_assert_eq!(a.n_hours, b.n_hours);
            prop_assert!((a.rmse - b.rmse).abs() <= 1e-9 * a.rmse.max(1.0));
            prop_assert!((a.mae - b.mae).abs() <= 1e-9 * a.mae.max(1.0));
        }

        #[test]
        fn kfold_partitions(n in 10usize..300, k in 2usize..10, seed in 0u64..50) {
            let rows: Vec<usize> = (0..n).collect();
            let plan = kfold(&rows, k, seed).unwrap();
            let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
            all.sort_unstable();
            prop_assert_eq!(&all, &rows);
            for f in &plan.folds {
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                prop_assert!(f.test.iter().all(|t| f.train.binary_search(t).is_err()));
            }
        }
    }
}
