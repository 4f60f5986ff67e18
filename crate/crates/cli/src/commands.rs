//! The subcommands. Each reads the run config, does its work and writes its
//! files under the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDateTime};
use irradcast::evaluation::{compare_models, compute_metrics, MetricSet, SplitConfig};
use irradcast::series::TIMESTAMP_FORMAT;
use irradcast::{ingest, synth, FittedModel, HourlySeries, ModelSpec, SiteLocation};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{InputFormat, RunConfig};
use crate::error::{io_error, CliError, CliResult, Context};

/// File names inside the output directory.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn series(&self) -> PathBuf {
        self.root.join("series.csv")
    }

    pub fn gaps(&self) -> PathBuf {
        self.root.join("gaps.csv")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn fit_summary(&self) -> PathBuf {
        self.root.join("fit_summary.json")
    }

    pub fn forecasts(&self) -> PathBuf {
        self.root.join("forecasts")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_text(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn residuals(&self) -> PathBuf {
        self.root.join("residuals")
    }
}

/// Site file kept next to a canonical series.
fn site_path(series: &Path) -> PathBuf {
    series.with_file_name("site.toml")
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    fs::write(path, contents).map_err(io_error(path))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_error(path))
}

/// Lowercase ASCII file stem derived from a model name.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('_') {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("model");
    }
    out
}

/// Slugs for `names`, with `_2`, `_3`, ... appended to repeats.
fn unique_slugs<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    names
        .into_iter()
        .map(|n| {
            let base = slug(n);
            let count = seen.entry(base.clone()).or_insert(0);
            *count += 1;
            if *count == 1 {
                base
            } else {
                format!("{base}_{count}")
            }
        })
        .collect()
}

fn write_series(series: &HourlySeries, layout: &Layout) -> CliResult<()> {
    let path = layout.series();
    let mut buf = Vec::new();
    series.write_canonical(&mut buf).context(path.display())?;
    write_file(&path, buf)?;

    let site = toml::to_string(series.site()).map_err(|e| CliError::Invalid(e.to_string()))?;
    write_file(&site_path(&path), site)?;

    let gaps_path = layout.gaps();
    let mut gaps = csv::Writer::from_writer(Vec::new());
    gaps.write_record(["variable", "start", "hours", "reason"])
        .and_then(|_| {
            series
                .gap_report()
                .iter()
                .try_for_each(|g| gaps.serialize(g))
        })
        .map_err(|e| CliError::Invalid(format!("{}: {e}", gaps_path.display())))?;
    let bytes = gaps
        .into_inner()
        .map_err(|e| CliError::Invalid(format!("{}: {e}", gaps_path.display())))?;
    write_file(&gaps_path, bytes)
}

/// Reads the canonical series, from `explicit` or the output directory.
pub fn load_series(config: &RunConfig, explicit: Option<&Path>) -> CliResult<HourlySeries> {
    let path = explicit.map_or_else(|| Layout::new(&config.output).series(), Path::to_path_buf);
    if !path.is_file() {
        return Err(CliError::Invalid(format!(
            "series file {} not found; run `irradcast ingest` or `irradcast synth` first",
            path.display()
        )));
    }
    let site_file = site_path(&path);
    let site = if site_file.is_file() {
        let text = fs::read_to_string(&site_file).map_err(io_error(&site_file))?;
        toml::from_str::<SiteLocation>(&text).map_err(|e| CliError::Config {
            path: site_file.clone(),
            message: e.to_string(),
        })?
    } else {
        config.site.ok_or_else(|| {
            CliError::Invalid(format!(
                "no site for {}: add a [site] table or a site.toml beside it",
                path.display()
            ))
        })?
    };
    HourlySeries::read_canonical(open(&path)?, site).context(path.display())
}

fn need_site(config: &RunConfig, path: &Path) -> CliResult<SiteLocation> {
    config.site.ok_or_else(|| {
        CliError::Invalid(format!("input {} needs a [site] table in the config", path.display()))
    })
}

/// Parses every input, joins them and runs the cleaning pipeline.
pub fn ingest(config: &RunConfig) -> CliResult<HourlySeries> {
    config.check_inputs()?;
    let mut parts = Vec::with_capacity(config.inputs.len());
    for input in &config.inputs {
        let path = &input.path;
        let reader = open(path)?;
        let part = match input.format {
            InputFormat::Tmy3 => ingest::parse_tmy3(reader).context(path.display())?,
            InputFormat::Csv => {
                let columns = input.columns.as_ref().expect("validated with the config");
                ingest::parse_generic_csv(reader, columns, need_site(config, path)?)
                    .context(path.display())?
            }
            InputFormat::Canonical => {
                HourlySeries::read_canonical(reader, need_site(config, path)?).context(path.display())?
            }
        };
        info!("{}: {} hours", path.display(), part.len());
        parts.push(part);
    }
    let site = match config.site {
        Some(site) => {
            if let Some(p) = parts.iter().find(|p| *p.site() != site) {
                warn!("config site {site:?} replaces file site {:?}", p.site());
            }
            site
        }
        None => *parts[0].site(),
    };
    let joined = ingest::concatenate(site, &parts).context("joining inputs")?;
    let prepared = ingest::prepare(&joined);
    write_series(&prepared, &Layout::new(&config.output))?;
    Ok(prepared)
}

/// Writes the synthetic series in place of an ingested one.
pub fn synth(config: &RunConfig) -> CliResult<HourlySeries> {
    let mut synth_config = config.synth.clone();
    if let Some(site) = config.site {
        synth_config.site = site;
    }
    let series = synth::generate(&synth_config).context("synth")?;
    write_series(&series, &Layout::new(&config.output))?;
    Ok(series)
}

/// Hours used for fitting: the training years of a holdout split, otherwise
/// every hour.
fn training_hours(series: &HourlySeries, split: Option<&SplitConfig>) -> Vec<usize> {
    match split {
        Some(SplitConfig::Holdout { train_years, .. }) => (0..series.len())
            .filter(|&t| train_years.contains(&series.timestamp(t).year()))
            .collect(),
        _ => (0..series.len()).collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitEntry {
    pub name: String,
    /// Model file, relative to the output directory.
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_report: Option<String>,
    /// In-sample daytime metrics; absent when no training hour could be scored.
    pub training: Option<MetricSet>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitSummary {
    pub models: Vec<FitEntry>,
    pub failures: BTreeMap<String, String>,
}

/// Monthly-scoped linear specs become one spec per training month.
fn expand(spec: &ModelSpec, series: &HourlySeries, train: &[usize]) -> Vec<(String, ModelSpec)> {
    if spec.month().is_none() {
        return vec![(spec.label(), spec.clone())];
    }
    let months: BTreeSet<u32> = train.iter().map(|&t| series.timestamp(t).month()).collect();
    months
        .into_iter()
        .map(|m| (format!("{} m{m:02}", spec.label()), spec.for_month(m)))
        .collect()
}

fn training_metrics(model: &FittedModel, series: &HourlySeries, hours: &[usize]) -> Option<MetricSet> {
    let forecasts = model.forecast_hours(series, hours).ok()?;
    let (mut pred, mut obs, mut day) = (Vec::new(), Vec::new(), Vec::new());
    for (&t, f) in hours.iter().zip(forecasts) {
        if let (Some(p), Some(o)) = (f, series.irradiance(t)) {
            pred.push(p);
            obs.push(o);
            day.push(series.is_daytime(t));
        }
    }
    compute_metrics(&pred, &obs, &day).ok()
}

/// Fits every configured model on the training hours and writes one model
/// file per fit. Fails only when no model could be fitted.
pub fn fit(config: &RunConfig, series_path: Option<&Path>) -> CliResult<FitSummary> {
    if config.models.is_empty() {
        return Err(CliError::Invalid("config lists no models".into()));
    }
    let series = load_series(config, series_path)?;
    let layout = Layout::new(&config.output);
    let train = training_hours(&series, config.split.as_ref());
    let jobs: Vec<(String, ModelSpec)> = config
        .models
        .iter()
        .flat_map(|spec| expand(spec, &series, &train))
        .collect();
    let slugs = unique_slugs(jobs.iter().map(|(n, _)| n.as_str()));

    let mut summary = FitSummary::default();
    for ((name, spec), stem) in jobs.iter().zip(&slugs) {
        let output = match spec.fit(&series, &train) {
            Ok(o) => o,
            Err(e) => {
                warn!("{name}: {e}");
                summary.failures.insert(name.clone(), e.to_string());
                continue;
            }
        };
        let file = format!("models/{stem}.toml");
        write_file(&layout.models().join(format!("{stem}.toml")), output.model.to_text().context(name)?)?;
        let grid_report = match &output.grid {
            Some(grid) => {
                let rel = format!("models/{stem}.grid.txt");
                write_file(&layout.models().join(format!("{stem}.grid.txt")), grid.to_table())?;
                Some(rel)
            }
            None => None,
        };
        let scored: Vec<usize> = match spec.month() {
            Some(m) => train
                .iter()
                .copied()
                .filter(|&t| series.timestamp(t).month() == m)
                .collect(),
            None => train.clone(),
        };
        info!("{name}: fitted");
        summary.models.push(FitEntry {
            name: name.clone(),
            file,
            grid_report,
            training: training_metrics(&output.model, &series, &scored),
        });
    }
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Invalid(e.to_string()))?;
    write_file(&layout.fit_summary(), json + "\n")?;
    if summary.models.is_empty() {
        return Err(CliError::AllFitsFailed(jobs.len()));
    }
    Ok(summary)
}

/// Which hours to forecast.
#[derive(Debug, Clone, Default)]
pub struct ForecastWindow {
    /// First hour, `YYYY-MM-DDTHH:MM`; the start of the series when absent.
    pub start: Option<String>,
    /// Number of hours; through the end of the series when absent.
    pub hours: Option<usize>,
}

fn window_hours(series: &HourlySeries, window: &ForecastWindow) -> CliResult<Vec<usize>> {
    let first = match &window.start {
        Some(text) => {
            let ts = NaiveDateTime::parse_from_str(text, TIMESTAMP_FORMAT)
                .map_err(|e| CliError::Invalid(format!("bad --start `{text}`: {e}")))?;
            series
                .index_of(ts)
                .ok_or_else(|| CliError::Invalid(format!("{text} is not in the series")))?
        }
        None => 0,
    };
    let end = match window.hours {
        Some(n) if first + n > series.len() => {
            return Err(CliError::Invalid(format!(
                "{n} hours from index {first} run past the end of the series ({} hours)",
                series.len()
            )))
        }
        Some(n) => first + n,
        None => series.len(),
    };
    Ok((first..end).collect())
}

fn fitted_models(layout: &Layout, explicit: &[PathBuf]) -> CliResult<Vec<(String, PathBuf)>> {
    if !explicit.is_empty() {
        return Ok(explicit
            .iter()
            .map(|p| {
                let stem = p.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
                (stem, p.clone())
            })
            .collect());
    }
    let path = layout.fit_summary();
    if !path.is_file() {
        return Err(CliError::Invalid(format!(
            "{} not found; run `irradcast fit` first or pass --model",
            path.display()
        )));
    }
    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
    let summary: FitSummary = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(summary
        .models
        .into_iter()
        .map(|m| {
            let file = layout.root.join(&m.file);
            let stem = file.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
            (stem, file)
        })
        .collect())
}

/// Writes `forecasts/<model>.csv` for each fitted model. Returns the files written.
pub fn forecast(
    config: &RunConfig,
    series_path: Option<&Path>,
    models: &[PathBuf],
    window: &ForecastWindow,
) -> CliResult<Vec<PathBuf>> {
    let series = load_series(config, series_path)?;
    let layout = Layout::new(&config.output);
    let hours = window_hours(&series, window)?;
    let mut written = Vec::new();
    let mut failed = 0;
    for (stem, path) in fitted_models(&layout, models)? {
        let result = fs::read_to_string(&path)
            .map_err(io_error(&path))
            .and_then(|text| FittedModel::from_text(&text).context(path.display()))
            .and_then(|model| model.forecast_hours(&series, &hours).context(path.display()));
        let forecasts = match result {
            Ok(f) => f,
            Err(e) => {
                warn!("{e}");
                failed += 1;
                continue;
            }
        };
        let mut out = String::from("timestamp,observed,forecast\n");
        for (&t, f) in hours.iter().zip(forecasts) {
            let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{}\n",
                series.timestamp(t).format(TIMESTAMP_FORMAT),
                cell(series.irradiance(t)),
                cell(f)
            ));
        }
        let target = layout.forecasts().join(format!("{stem}.csv"));
        write_file(&target, out)?;
        written.push(target);
    }
    if failed > 0 {
        return Err(CliError::PartialFailure(failed));
    }
    Ok(written)
}

/// Selects configured specs by label or slug.
fn select(specs: &[ModelSpec], names: &[String]) -> CliResult<Vec<ModelSpec>> {
    if names.is_empty() {
        return Ok(specs.to_vec());
    }
    names
        .iter()
        .map(|name| {
            specs
                .iter()
                .find(|s| s.label() == *name || slug(&s.label()) == *name)
                .cloned()
                .ok_or_else(|| CliError::UnknownModel(name.clone()))
        })
        .collect()
}

/// Evaluates the configured models (plus the simple forecast) under the
/// configured split and writes the report and residual files. Returns the
/// plain-text report.
pub fn evaluate(config: &RunConfig, series_path: Option<&Path>, names: &[String]) -> CliResult<String> {
    let specs = select(&config.models, names)?;
    let split = config
        .split
        .as_ref()
        .ok_or_else(|| CliError::Invalid("evaluate needs a [split] table in the config".into()))?;
    let series = load_series(config, series_path)?;
    let plan = split.build(&series).context("split")?;
    let report = compare_models(&series, &specs, &plan);

    let layout = Layout::new(&config.output);
    write_file(&layout.report_json(), report.to_json().context("report")? + "\n")?;
    let text = report.to_text();
    write_file(&layout.report_text(), &text)?;
    let stems = unique_slugs(report.evaluations.iter().map(|e| e.name.as_str()));
    for (evaluation, stem) in report.evaluations.iter().zip(stems) {
        let mut buf = Vec::new();
        evaluation
            .write_residuals(&series, &mut buf)
            .context(&evaluation.name)?;
        write_file(&layout.residuals().join(format!("{stem}.csv")), buf)?;
    }
    for (name, reason) in &report.failures {
        warn!("{name}: {reason}");
    }
    if !report.failures.is_empty() {
        return Err(CliError::PartialFailure(report.failures.len()));
    }
    Ok(text)
}
