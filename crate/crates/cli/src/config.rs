//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// A problem with the user's input: bad flag values, missing keys, unreadable
/// config. Always maps to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(UsageError(msg.into()).into())
}

/// Resolved settings of one run. File values are loaded first and command-line
/// flags overwrite them; the result is written next to the outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected key = value, got {raw:?}", n + 1));
            };
            entries.insert(normalize(k), v.trim().to_string());
        }
        Ok(RunConfig { entries })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) => usage(format!("cannot read config {}: {e}", path.display())),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(normalize(key), value.to_string());
    }

    pub fn set_default(&mut self, key: &str, value: impl ToString) {
        self.entries.entry(normalize(key)).or_insert_with(|| value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None | Some("") => Ok(None),
            Some(v) => match v.parse() {
                Ok(x) => Ok(Some(x)),
                Err(e) => usage(format!("invalid value {v:?} for {key}: {e}")),
            },
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> anyhow::Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> anyhow::Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => usage(format!("missing required setting `{key}` (flag --{})", key.replace('_', "-"))),
        }
    }

    pub fn flag(&self, key: &str) -> anyhow::Result<bool> {
        match self.raw(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(false),
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" | "" => Ok(false),
                _ => usage(format!("invalid boolean {v:?} for {key}")),
            },
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> anyhow::Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| match s.trim().parse() {
                Ok(x) => Ok(x),
                Err(e) => usage(format!("invalid entry {s:?} in {key}: {e}")),
            })
            .collect::<anyhow::Result<Vec<T>>>()
            .map(Some)
    }

    /// Integer range: `0..8` (inclusive), `0..=8`, `1,3,5` or a single value.
    pub fn range(&self, key: &str, default: std::ops::RangeInclusive<usize>) -> anyhow::Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default.collect()),
            Some(v) => parse_range(v).map_err(|e| UsageError(format!("{key}: {e}")).into()),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out").unwrap_or("out"))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

pub fn parse_range(v: &str) -> Result<Vec<usize>, String> {
    let v = v.trim();
    let num = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    if let Some((a, b)) = v.split_once("..") {
        let (lo, hi) = (num(a)?, num(b.trim_start_matches('='))?);
        if lo > hi {
            return Err(format!("empty range {v}"));
        }
        return Ok((lo..=hi).collect());
    }
    v.split(',').map(num).collect()
}
