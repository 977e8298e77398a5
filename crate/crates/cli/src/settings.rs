//! `key = value` run configuration with command-line overrides.
//!
//! Keys are the long flag names; `-` and `_` are interchangeable. Blank
//! lines and lines starting with `#` are ignored. Every value a command
//! reads is recorded, so the resolved configuration can be echoed into its
//! outputs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use slime::{Error, Result};

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = normalize(key);
            if file.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "config key {key} given twice"
                )));
            }
        }
        Ok(Self {
            file,
            resolved: BTreeMap::new(),
        })
    }

    /// The flag if given, else the file value, else `None`.
    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(raw.parse().map_err(|_| {
                    Error::InvalidConfig(format!("config key {key}: cannot parse {raw:?}"))
                })?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn or<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T> {
        match self.optional(key, flag)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.optional(key, flag)?
            .ok_or_else(|| Error::InvalidConfig(format!("missing --{key}")))
    }

    /// The resolved configuration. Fails on file keys the command never read.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        let unused: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.resolved.contains_key(*k))
            .map(String::as_str)
            .collect();
        if unused.is_empty() {
            Ok(self.resolved)
        } else {
            Err(Error::InvalidConfig(format!(
                "unused config keys: {}",
                unused.join(", ")
            )))
        }
    }
}
