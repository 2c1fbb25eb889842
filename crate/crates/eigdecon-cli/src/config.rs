use std::fmt;
use std::path::{Path, PathBuf};

use eigdecon::measure::FamilyId;
use eigdecon::{Error, Mode, SolverConfig, SpikeCount};
use serde::{Deserialize, Serialize};

pub const DESK_MATRIX_N: usize = 2048;
pub const DESK_CLASSICAL_N: usize = 102_400;
pub const MIN_DIMENSION: usize = 64;
pub const DEFAULT_BINS: usize = 100;

/// Spike count as written in a config: a number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spikes {
    Fixed(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl From<Spikes> for SpikeCount {
    fn from(s: Spikes) -> Self {
        match s {
            Spikes::Fixed(n) => SpikeCount::Fixed(n),
            Spikes::Auto(_) => SpikeCount::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to the family's own mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub family: FamilyId,
    #[serde(default)]
    pub true_parameters: Vec<f64>,
    /// Matrix dimension, or sample count in classical mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spikes: Option<Spikes>,
    /// Use the noiseless forward model instead of a simulated spectrum.
    #[serde(default)]
    pub noiseless: bool,
    /// JSON file `{"values": [...]}` with a measured spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        write!(f, ": ")?;
        if let Some(field) = &self.field {
            write!(f, "`{field}`: ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or_else(|| self.family.native_mode())
    }

    pub fn dimension(&self) -> usize {
        self.dimension.unwrap_or(match self.mode() {
            Mode::Classical => DESK_CLASSICAL_N,
            _ => DESK_MATRIX_N,
        })
    }

    pub fn spikes(&self) -> SpikeCount {
        self.spikes
            .map(SpikeCount::from)
            .unwrap_or(SpikeCount::Fixed(self.true_parameters.len()))
    }

    pub fn bins(&self) -> usize {
        self.bins.unwrap_or(DEFAULT_BINS)
    }

    /// Fills every defaulted field so the echo alone reproduces the run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.mode = Some(self.mode());
        c.bins = Some(self.bins());
        if self.spectrum.is_none() && !self.noiseless {
            c.dimension = Some(self.dimension());
        }
        c.spikes = Some(match self.spikes() {
            SpikeCount::Fixed(n) => Spikes::Fixed(n),
            SpikeCount::Auto => Spikes::Auto(AutoTag::Auto),
        });
        c
    }

    /// Field-level checks; errors name the offending field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let fail = |f: &str, m: String| Err((f.to_string(), m));
        let family = self.family.family();
        let (lo, hi) = family.domain();
        if let Err(e) = family.check_normalization(self.mode()) {
            return fail("mode", format!("{} does not fit family {}: {e}", self.mode(), self.family));
        }
        for (i, &x) in self.true_parameters.iter().enumerate() {
            if !family.contains(x) {
                return fail(&format!("true_parameters[{i}]"), format!("{x} is outside the domain [{lo}, {hi}]"));
            }
        }
        if let Some(n) = self.dimension {
            if n < MIN_DIMENSION {
                return fail("dimension", format!("{n} is below the minimum {MIN_DIMENSION}"));
            }
        }
        if self.spectrum.is_some() && self.noiseless {
            return fail("noiseless", "cannot be combined with `spectrum`".into());
        }
        if self.spectrum.is_none() && self.true_parameters.is_empty() {
            return fail("true_parameters", "needed to simulate when no `spectrum` is given".into());
        }
        if self.spikes() == SpikeCount::Fixed(0) {
            return fail("spikes", "must be at least 1 or \"auto\"".into());
        }
        if self.bins == Some(0) {
            return fail("bins", "must be at least 1".into());
        }
        if let Err(e) = self.solver.validate() {
            return match e {
                Error::InvalidInput { field, message } => fail(&format!("solver.{field}"), message),
                other => fail("solver", other.to_string()),
            };
        }
        Ok(())
    }
}

/// 1-based line of the first occurrence of `"key"`.
fn line_of(text: &str, field: &str) -> Option<usize> {
    let keys: Vec<&str> = field.split(['[', '.']).filter(|k| !k.ends_with(']')).collect();
    let find = |k: &str| text.find(&format!("\"{k}\"")).map(|i| text[..i].matches('\n').count() + 1);
    keys.iter().rev().find_map(|k| find(k))
}

fn from_json_error(path: &str, e: serde_json::Error) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        line: Some(e.line()),
        column: Some(e.column()),
        field: None,
        message: e.to_string(),
    }
}

/// Parses a config file, or the `config` echo of a report written by this tool.
pub fn parse(path: &str, text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| from_json_error(path, e))?;
    let cfg: ExperimentConfig = match value.get("config") {
        Some(echo) if value.get("report").is_some() => {
            serde_json::from_value(echo.clone()).map_err(|e| ConfigError {
                path: path.to_string(),
                line: None,
                column: None,
                field: Some("config".into()),
                message: e.to_string(),
            })?
        }
        _ => serde_json::from_str(text).map_err(|e| from_json_error(path, e))?,
    };
    cfg.validate().map_err(|(field, message)| ConfigError {
        path: path.to_string(),
        line: line_of(text, &field),
        column: None,
        field: Some(field),
        message,
    })?;
    Ok(cfg)
}

pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut cfg = parse(&path.display().to_string(), &text)?;
    if let Some(s) = &cfg.spectrum {
        if s.is_relative() {
            cfg.spectrum = Some(path.parent().unwrap_or(Path::new(".")).join(s));
        }
    }
    Ok(cfg)
}
