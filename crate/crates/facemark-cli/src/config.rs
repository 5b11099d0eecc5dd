//! Key=value configuration files mirroring the command-line flags.
//!
//! Lines look like `occ-threshold = 0.25` or `model = "face.csv"`; `#`
//! starts a comment. Keys use the long flag names. Explicit flags always win
//! over config values.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    lineno + 1
                );
            };
            let key = key.trim().to_string();
            let value = value.trim().trim_matches('"').to_string();
            if key.is_empty() {
                bail!("{}:{}: empty key", path.display(), lineno + 1);
            }
            values.insert(key, value);
        }
        Ok(Config { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Flag value if given, else config value, else the default.
    pub fn resolve_f64(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(s) => s.parse().with_context(|| format!("config key `{key}`: bad number `{s}`")),
            None => Ok(default),
        }
    }

    pub fn resolve_usize(&self, flag: Option<usize>, key: &str, default: usize) -> Result<usize> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(s) => s.parse().with_context(|| format!("config key `{key}`: bad integer `{s}`")),
            None => Ok(default),
        }
    }

    pub fn resolve_u64(&self, flag: Option<u64>, key: &str, default: u64) -> Result<u64> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(s) => s.parse().with_context(|| format!("config key `{key}`: bad integer `{s}`")),
            None => Ok(default),
        }
    }

    pub fn resolve_opt_f64(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            Some(s) => Ok(Some(
                s.parse()
                    .with_context(|| format!("config key `{key}`: bad number `{s}`"))?,
            )),
            None => Ok(None),
        }
    }

    pub fn resolve_opt_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.get(key).map(PathBuf::from))
    }
}
