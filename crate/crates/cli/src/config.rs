use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use vhip::simulator::SimError;
use vhip::Scenario;

pub const FIG2_PRESET: &str = include_str!("../configs/fig2.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Trajectory file; sidecars are named after it.
    pub path: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("trajectory.csv"),
            format: OutputFormat::Csv,
        }
    }
}

impl OutputConfig {
    /// Sibling of the trajectory file with `suffix` replacing its extension.
    pub fn sibling(&self, suffix: &str) -> PathBuf {
        self.path.with_extension(suffix)
    }
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized checks.
    pub seed: u64,
    pub output: OutputConfig,
    pub scenario: Scenario,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: OutputConfig::default(),
            scenario: Scenario::fig2(),
        }
    }
}

const TOP_LEVEL_KEYS: [&str; 3] = ["seed", "output", "scenario"];

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig2" => Self::parse(FIG2_PRESET, "preset fig2"),
            other => bail!("unknown preset `{other}` (available: fig2)"),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| anyhow!("{origin}: {e}"))?;
        config.validate().with_context(|| format!("{origin}: invalid configuration"))?;
        Ok(config)
    }

    /// Applies `key=value` overrides. Keys are dotted paths; a key that
    /// does not start with `seed`, `output` or `scenario` is looked up
    /// under `scenario`.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = Table::try_from(self).context("cannot encode configuration")?;
        for assignment in overrides {
            let (key, raw) = assignment
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
            let mut path: Vec<&str> = key.trim().split('.').collect();
            if path.iter().any(|p| p.is_empty()) {
                bail!("override `{assignment}` has an empty key segment");
            }
            if !TOP_LEVEL_KEYS.contains(&path[0]) {
                path.insert(0, "scenario");
            }
            set_path(&mut table, &path, parse_value(raw.trim()))
                .with_context(|| format!("override `{assignment}`"))?;
        }
        let config: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| anyhow!("overrides: {}", e.message()))?;
        config.validate().context("overrides: invalid configuration")?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate().map_err(|e| match e {
            SimError::InvalidScenario { field, reason } => anyhow!("scenario.{field}: {reason}"),
            other => anyhow!("scenario: {other}"),
        })?;
        if self.output.path.as_os_str().is_empty() {
            bail!("output.path: must not be empty");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("cannot encode configuration")
    }
}

/// TOML literal when it parses as one, bare string otherwise.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

fn set_path(table: &mut Table, path: &[&str], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut current = table;
    for (depth, segment) in parents.iter().enumerate() {
        let entry = current
            .entry(segment.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{}` is not a table", path[..=depth].join(".")))?;
    }
    let value = match (current.get(*last), value) {
        (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    };
    current.insert(last.to_string(), value);
    Ok(())
}
