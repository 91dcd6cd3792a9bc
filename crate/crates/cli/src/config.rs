//! Resolved `key=value` configuration for a run.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cachenet::output::format_sig;

/// Ordered keys with their resolved values.
#[derive(Debug, Clone)]
pub struct Config {
    entries: Vec<(String, String)>,
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("expected key=value, got '{s}'"))?;
    Ok((k.trim(), v.trim()))
}

impl Config {
    /// Starts from `defaults`, applies `file` (lines of `key=value`, `#`
    /// comments) and then `sets`. Keys outside `defaults` are rejected.
    pub fn resolve(defaults: &[(&str, &str)], file: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut cfg = Config { entries: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            for (n, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = split_pair(line).with_context(|| format!("{}:{}", path.display(), n + 1))?;
                cfg.set(k, v)?;
            }
        }
        for s in sets {
            let (k, v) = split_pair(s)?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => {
                e.1 = value.to_string();
                Ok(())
            }
            None => {
                let known: Vec<&str> = self.entries.iter().map(|(k, _)| k.as_str()).collect();
                bail!("unknown key '{key}' (known: {})", known.join(", "))
            }
        }
    }

    pub fn str(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("key {key} missing from defaults"))
    }

    pub fn is_none(&self, key: &str) -> bool {
        matches!(self.str(key), "" | "none")
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.str(key);
        v.parse::<f64>().map_err(|_| anyhow!("{key}: not a number: '{v}'"))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.is_none(key) {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.str(key);
        v.parse::<usize>().map_err(|_| anyhow!("{key}: not a non-negative integer: '{v}'"))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.str(key);
        v.parse::<u64>().map_err(|_| anyhow!("{key}: not a non-negative integer: '{v}'"))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => bail!("{key}: expected true or false, got '{v}'"),
        }
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.str(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|_| anyhow!("{key}: bad list entry '{s}'")))
            .collect()
    }

    /// `# key=value` lines, in default order.
    pub fn echo(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}

/// Formats a float for output.
pub fn num(x: f64) -> String {
    format_sig(x)
}
