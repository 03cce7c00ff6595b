//! `key=value` run configuration files. Keys are the long flag names
//! without the leading dashes; flags given on the command line win.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

pub const KEYS: &[&str] = &[
    "data-dir",
    "lines",
    "codes",
    "loads",
    "shapes-dir",
    "algorithm",
    "step-size",
    "epsilon",
    "max-iters",
    "seed",
    "out",
    "jobs",
    "minute",
    "trace-every",
    "param",
    "values",
    "dual-bound",
    "arrival-rate",
    "start-minute",
    "iterations-per-minute",
    "battery-kwh",
    "charger-kw",
    "dual-step-size",
    "primal-step-size",
    "report-lines",
];

#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| CliError::Config(format!("{}:{}: {msg}", path.display(), i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key=value, got `{line}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(at(format!("unknown key `{key}`")));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(at(format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigFile { path: Some(path.to_path_buf()), values })
    }

    /// The flag value if given, else the parsed config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                let file = self.path.as_deref().map(|p| p.display().to_string()).unwrap_or_default();
                CliError::Config(format!("{file}: invalid `{key}` value `{raw}`: {e}"))
            }),
        }
    }

    /// Comma-separated list from a flag or the config file.
    pub fn pick_list<T: FromStr>(&self, flag: Option<&str>, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = match flag.map(str::to_string).or_else(|| self.values.get(key).cloned()) {
            None => return Ok(None),
            Some(raw) => raw,
        };
        raw.split(',')
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|e| CliError::Config(format!("invalid `{key}` entry `{}`: {e}", v.trim())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}
