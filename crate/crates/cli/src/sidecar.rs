//! Release metadata: flat `key=value` lines, `#` comments allowed. The
//! sidecar carries everything `verify` needs besides the two CSV files.
//! The seed appears only when explicitly disclosed; seed plus parameters
//! reconstructs the noise and hence the original response.

use std::fmt::Display;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
pub struct Sidecar {
    pairs: Vec<(String, String)>,
}

impl Sidecar {
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.pairs.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Data(format!("sidecar is missing key '{key}'")))
    }

    pub fn require_f64(&self, key: &str) -> CliResult<f64> {
        self.require(key)?
            .parse()
            .map_err(|_| CliError::Data(format!("sidecar key '{key}' is not a number")))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.pairs {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read sidecar {}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Data(format!(
                    "sidecar {}: line {} is not key=value",
                    path.display(),
                    i + 1
                )));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Sidecar { pairs })
    }
}
