use std::path::PathBuf;
use std::str::FromStr;

use catqcf::scaling::DEFAULT_THRESHOLDS;
use catqcf::{Convention, HilbertDim, MapParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Series,
    Decompose,
    ScanEps,
    ScanN,
    Selftest,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("bad --set '{0}': expected key=value")]
    BadOverride(String),
}

/// Resolved experiment configuration, echoed into every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(rename = "dim_N")]
    pub dim_n: usize,
    pub k: u32,
    pub eps: [f64; 3],
    pub eps_axis: Option<Vec<f64>>,
    /// Direction of the eps axis in an eps scan.
    pub eps_direction: [f64; 3],
    pub n_axis: Option<Vec<usize>>,
    pub t_max: usize,
    pub n_packets: usize,
    pub seed: u64,
    pub p_thresholds: Vec<f64>,
    pub convention: Convention,
    pub output_dir: PathBuf,
    /// Worker threads; 0 picks the number of CPUs.
    pub threads: usize,
    /// Write one CSV per packet in series and decompose modes.
    pub packet_files: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Series,
            dim_n: 512,
            k: 1,
            eps: [0.0; 3],
            eps_axis: None,
            eps_direction: [1.0, 0.0, 0.0],
            n_axis: None,
            t_max: 40,
            n_packets: 100,
            seed: 0,
            p_thresholds: DEFAULT_THRESHOLDS.to_vec(),
            convention: Convention::Semiclassical,
            output_dir: PathBuf::from("."),
            threads: 0,
            packet_files: true,
        }
    }
}

pub const DEFAULT_EPS_AXIS: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];
pub const DEFAULT_N_AXIS: [usize; 5] = [64, 128, 256, 512, 1024];

impl RunConfig {
    pub fn dim(&self) -> HilbertDim {
        HilbertDim::new(self.dim_n).expect("validated")
    }

    pub fn params(&self) -> MapParams {
        MapParams::new(self.k, self.eps).expect("validated")
    }

    pub fn eps_axis(&self) -> Vec<f64> {
        self.eps_axis
            .clone()
            .unwrap_or_else(|| DEFAULT_EPS_AXIS.to_vec())
    }

    pub fn n_axis(&self) -> Vec<usize> {
        self.n_axis
            .clone()
            .unwrap_or_else(|| DEFAULT_N_AXIS.to_vec())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.dim_n % 2 != 0 {
            return invalid(format!("N must be even, got {}", self.dim_n));
        }
        if self.dim_n < 2 {
            return invalid("N must be at least 2".into());
        }
        if let Err(e) = MapParams::new(self.k, self.eps) {
            return invalid(e.to_string());
        }
        if self.t_max < 1 {
            return invalid("t_max must be at least 1".into());
        }
        if self.n_packets < 1 {
            return invalid("n_packets must be at least 1".into());
        }
        if self.p_thresholds.is_empty() || self.p_thresholds.iter().any(|p| !(*p > 0.0 && *p < 1.0))
        {
            return invalid("p_thresholds must be non-empty and inside (0, 1)".into());
        }
        if let Some(axis) = &self.eps_axis {
            if axis.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return invalid("eps_axis values must be positive".into());
            }
        }
        if !self.eps_direction.iter().all(|d| d.is_finite()) || self.eps_direction == [0.0; 3] {
            return invalid("eps_direction must be a finite nonzero vector".into());
        }
        if let Some(axis) = &self.n_axis {
            if let Some(n) = axis.iter().find(|n| **n % 2 != 0 || **n < 2) {
                return invalid(format!("N must be even, got {n} in n_axis"));
            }
        }
        Ok(())
    }
}

/// Parses a JSON document into a validated config. An empty document
/// yields the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(text, &[])
}

/// Parses `text`, applies `key=value` overrides and validates. Override
/// values are read as JSON, falling back to a plain string.
pub fn resolve(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc = if text.trim().is_empty() {
        Map::new()
    } else {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(ConfigError::Syntax("top level must be an object".into())),
            Err(e) => return Err(ConfigError::Syntax(e.to_string())),
        }
    };
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(item.clone()))?;
        let value = Value::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        doc.insert(key.trim().to_string(), value);
    }
    let config: RunConfig = serde_json::from_value(Value::Object(doc))
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
