//! Experiment configuration files.
//!
//! A config is a TOML document with a few top-level keys and at most one
//! level of tables:
//!
//! ```toml
//! experiment = "poincare-nh"
//! seed = 7
//! output = "out/poincare-nh"
//!
//! [system]
//! eps = [0.1, 1.0]
//!
//! [initial]
//! tau = [0.5, 1.0, 2.42]
//!
//! [integrator]
//! scheme = "rk4"
//! dt = 0.01
//!
//! [section]
//! n_crossings = 2000
//! ```
//!
//! Unknown keys are rejected. Every key is optional except `experiment`;
//! each experiment fills in its own defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub section: SectionConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Coupling strengths `ε`; exclusive with `q_mass`.
    pub eps: Option<Vec<f64>>,
    /// Thermostat masses `Q = 1/ε²`.
    pub q_mass: Option<Vec<f64>>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Actions on the `θ = 0, α = 0` axis.
    pub tau: Option<Vec<f64>>,
    /// Positions with every other coordinate zero.
    pub q0: Option<Vec<f64>>,
    /// Explicit full states.
    pub states: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Rk4,
    Splitting,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Option<SchemeName>,
    pub dt: Option<f64>,
    pub n_steps: Option<u64>,
    /// Budget used under `--paper-scale`.
    pub paper_n_steps: Option<u64>,
    pub sample_stride: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub n_crossings: Option<usize>,
    pub paper_n_crossings: Option<usize>,
    pub direction: Option<DirectionName>,
    /// Largest island count tried by the cluster detector.
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub bins: Option<usize>,
    pub r_cutoff: Option<f64>,
    pub grid_n: Option<usize>,
    pub checkpoints: Option<Vec<u64>>,
    /// Contour levels of the averaged first integral.
    pub levels: Option<Vec<f64>>,
    pub tau_range: Option<[f64; 2]>,
    pub alpha_range: Option<[f64; 2]>,
    pub resolution: Option<usize>,
    pub samples: Option<usize>,
}

/// A configuration problem, located when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn field(path: &Path, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.to_path_buf(),
            line: None,
            column: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }

    /// Like [`ConfigError::field`], pointing at the line that sets `field`
    /// (dotted `table.key`) when the config text contains it.
    pub fn at(path: &Path, text: &str, field: &str, message: impl Into<String>) -> Self {
        let mut err = Self::field(path, field, message);
        if let Some((line, column)) = find_key(text, field) {
            err.line = Some(line);
            err.column = Some(column);
        }
        err
    }
}

/// 1-based position of the key that sets the dotted `field`.
fn find_key(text: &str, field: &str) -> Option<(usize, usize)> {
    let (table, key) = match field.split_once('.') {
        Some((t, k)) => (Some(t), k),
        None => (None, field),
    };
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_start();
        if line.starts_with('[') {
            current = Some(
                line.trim_end()
                    .trim_matches(|c| c == '[' || c == ']')
                    .trim()
                    .to_string(),
            );
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if k.trim() == key && current.as_deref() == table {
            return Some((i + 1, raw.len() - line.len() + 1));
        }
    }
    None
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of a byte offset.
fn locate(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Dotted key of the table entry a span falls in, best effort.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let before = &text[..offset.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line = text[line_start..].lines().next()?;
    let key = line.split('=').next()?.trim();
    if key.is_empty() || key.starts_with('[') || key.starts_with('#') {
        return None;
    }
    let table = before
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').to_string());
    Some(match table {
        Some(t) => format!("{t}.{key}"),
        None => key.to_string(),
    })
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let (line, column, field) = match e.span() {
                Some(span) => {
                    let (l, c) = locate(text, span.start);
                    (Some(l), Some(c), key_at(text, span.start))
                }
                None => (None, None, None),
            };
            ConfigError {
                path: path.to_path_buf(),
                line,
                column,
                field,
                message: e.message().trim().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            field: None,
            message: format!("cannot read config: {e}"),
        })?;
        let cfg = Self::parse(&text, path)?;
        Ok((cfg, text))
    }
}
