//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use irradcast::evaluation::SplitConfig;
use irradcast::ingest::ColumnMap;
use irradcast::synth::SynthConfig;
use irradcast::{ModelSpec, SiteLocation};
use serde::Deserialize;

use crate::error::{io_error, CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Tmy3,
    /// CSV with named columns; needs a `columns` table.
    Csv,
    /// The canonical series CSV written by `ingest`.
    Canonical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFile {
    pub path: PathBuf,
    pub format: InputFormat,
    #[serde(default)]
    pub columns: Option<ColumnMap>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the synthetic generator, k-fold and network seeds.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub site: Option<SiteLocation>,
    #[serde(default)]
    pub inputs: Vec<InputFile>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub split: Option<SplitConfig>,
    #[serde(default)]
    pub synth: SynthConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output: default_output(),
            site: None,
            inputs: Vec::new(),
            models: Vec::new(),
            split: None,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses `text`; relative paths are taken from `base`.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> CliResult<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.output = base.join(&config.output);
        for input in &mut config.inputs {
            input.path = base.join(&input.path);
        }
        config.validate(origin)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    fn validate(&self, origin: &Path) -> CliResult<()> {
        if let Some(site) = &self.site {
            site.validate().context(origin.display())?;
        }
        for (i, spec) in self.models.iter().enumerate() {
            spec.validate()
                .context(format!("{}: models[{i}] ({})", origin.display(), spec.label()))?;
        }
        for input in &self.inputs {
            if input.format == InputFormat::Csv && input.columns.is_none() {
                return Err(CliError::Config {
                    path: origin.to_path_buf(),
                    message: format!("input {} has format csv but no columns table", input.path.display()),
                });
            }
        }
        self.synth.validate().context(format!("{}: synth", origin.display()))
    }

    /// Applies command-line overrides, then pushes the run seed into every
    /// seeded component.
    pub fn apply_overrides(&mut self, seed: Option<u64>, out: Option<PathBuf>) {
        if seed.is_some() {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.output = out;
        }
        let Some(seed) = self.seed else {
            return;
        };
        self.synth.seed = seed;
        self.split = self.split.take().map(|s| s.with_seed(seed));
        for spec in &mut self.models {
            if let ModelSpec::Mlp { config, .. } = spec {
                config.seed = seed;
            }
        }
    }

    /// Input files must exist when a command reads them.
    pub fn check_inputs(&self) -> CliResult<()> {
        if self.inputs.is_empty() {
            return Err(CliError::Invalid("config lists no input files".into()));
        }
        for input in &self.inputs {
            if !input.path.is_file() {
                return Err(CliError::Invalid(format!(
                    "input file {} does not exist",
                    input.path.display()
                )));
            }
        }
        Ok(())
    }
}
