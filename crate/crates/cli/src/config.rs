//! Flat TOML configuration and grid parsing. Precedence is flag, then config
//! key, then built-in default; every command echoes the configuration it
//! resolved to standard error as `resolved.<key>=<value>` lines.

use std::path::Path;

use crate::error::{CliError, CliResult};

pub struct Config(toml::Table);

impl Config {
    pub fn empty() -> Self {
        Config(toml::Table::new())
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Ok(Config(table))
    }

    pub fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(v)) => Ok(Some(*v)),
            Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(bad_type(key, "a number", other)),
        }
    }

    pub fn u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(other) => Err(bad_type(key, "a non-negative integer", other)),
        }
    }

    pub fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        Ok(self.u64(key)?.map(|v| v as usize))
    }

    pub fn u32(&self, key: &str) -> CliResult<Option<u32>> {
        match self.u64(key)? {
            None => Ok(None),
            Some(v) => u32::try_from(v)
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key '{key}': {v} does not fit u32"))),
        }
    }

    pub fn bool(&self, key: &str) -> CliResult<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(v)) => Ok(Some(*v)),
            Some(other) => Err(bad_type(key, "a boolean", other)),
        }
    }

    pub fn string(&self, key: &str) -> CliResult<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(v)) => Ok(Some(v.clone())),
            Some(other) => Err(bad_type(key, "a string", other)),
        }
    }
}

fn bad_type(key: &str, want: &str, got: &toml::Value) -> CliError {
    CliError::Usage(format!(
        "config key '{key}': expected {want}, found {}",
        got.type_str()
    ))
}

/// Parses a grid argument: a comma list like `0.5,1,2` or a range
/// `lo:hi:step` (`lo:hi` defaults the step to 0.1). Range values are built
/// as `lo + k*step`, not by repeated addition, so `0:2:0.25` lands exactly
/// on the grid it prints.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let parse_one = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("grid value '{s}' is not a number")))
    };
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (parse_one(lo)?, parse_one(hi)?, 0.1),
            [lo, hi, step] => (parse_one(lo)?, parse_one(hi)?, parse_one(step)?),
            _ => {
                return Err(CliError::Usage(format!(
                    "grid '{text}': expected lo:hi or lo:hi:step"
                )))
            }
        };
        if !lo.is_finite() || !hi.is_finite() || !(step > 0.0) || hi < lo {
            return Err(CliError::Usage(format!(
                "grid '{text}': need finite lo <= hi and step > 0"
            )));
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = lo + f64::from(k) * step;
            if v > hi + step * 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        out
    } else {
        text.split(',').map(parse_one).collect::<CliResult<_>>()?
    };
    if values.is_empty() {
        return Err(CliError::Usage(format!("grid '{text}' is empty")));
    }
    Ok(values)
}
