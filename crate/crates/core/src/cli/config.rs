//! Flat key=value run configuration. Flags override file values; the
//! resolved map is what gets written next to the output.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

/// Every key a config file may set.
pub const KEYS: &[&str] = &[
    "command", "output", "format", "no-timestamp", "threads", "n", "l", "omegas", "z-sq", "z", "y", "x", "v", "p",
    "rho", "tau", "mode", "radius", "rel-tol", "samples", "seed", "max-n", "r", "xi", "alpha", "beta", "a", "w",
    "n-list",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn normalise_key(k: &str) -> String {
    k.trim().replace('_', "-").to_ascii_lowercase()
}

impl RunConfig {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", ln + 1)))?;
            let k = normalise_key(k);
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("config line {}: unknown key '{k}'", ln + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalise_key(key), value.into());
    }

    /// Sets `key` only when neither the file nor a flag did.
    pub fn set_default(&mut self, key: &str, value: impl Into<String>) {
        self.values.entry(normalise_key(key)).or_insert_with(|| value.into());
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("--{key}: cannot parse '{s}'"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::Config(format!("missing required flag --{key}")))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(s) = self.values.get(key) else { return Ok(None) };
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("--{key}: cannot parse '{t}'"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.list(key)?.ok_or_else(|| Error::Config(format!("missing required flag --{key}")))
    }

    pub fn complex_list(&self, key: &str) -> Result<Option<Vec<Complex64>>> {
        let Some(s) = self.values.get(key) else { return Ok(None) };
        s.split(',').map(|t| parse_complex(t).map_err(|e| Error::Config(format!("--{key}: {e}")))).collect::<Result<_>>().map(Some)
    }

    pub fn require_complex_list(&self, key: &str) -> Result<Vec<Complex64>> {
        self.complex_list(key)?.ok_or_else(|| Error::Config(format!("missing required flag --{key}")))
    }

    /// The resolved configuration as `key = value` lines, keys sorted.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses `1.5`, `-2i`, `1+2i`, `3e-1-0.5i` (a trailing `j` also works).
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse '{s}' as a complex number"));
    let num = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse().map_err(|_| bad()),
        }
    };
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return Ok(Complex64::new(s.parse().map_err(|_| bad())?, 0.0));
    };
    let b = body.as_bytes();
    let split = (1..b.len()).rev().find(|&k| (b[k] == b'+' || b[k] == b'-') && !matches!(b[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().map_err(|_| bad())?;
            Ok(Complex64::new(re, num(&body[k..])?))
        }
        None => Ok(Complex64::new(0.0, num(body)?)),
    }
}
