//! Key-value run configuration: a plain text file of `key = value` lines
//! plus command-line overrides, all numbers parsed as f64.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    ConfigError(format!("{}:{}: expected key = value", path.display(), lineno + 1))
                })?;
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("override '{item}' is not key=value")))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("key '{key}': '{raw}' is not a number"))),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let v = self.f64(key, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(ConfigError(format!("key '{key}': expected a non-negative integer")));
        }
        Ok(v as usize)
    }

    pub fn positive_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.f64(key, default)?;
        if !(v > 0.0) {
            return Err(ConfigError(format!("key '{key}' must be > 0, got {v}")));
        }
        Ok(v)
    }
}
