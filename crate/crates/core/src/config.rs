//! Flat key=value configuration files.
//!
//! One setting per line, `key = value`; `#` starts a comment. Unknown keys
//! are rejected against a caller-supplied schema so typos fail loudly, and
//! the fully-resolved set (defaults plus overrides) can be written back out
//! for reproducibility.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Parsed key=value settings with typed accessors.
#[derive(Clone, Debug, Default)]
pub struct KeyValueConfig {
    entries: BTreeMap<String, String>,
}

impl KeyValueConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(KeyValueConfig { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingInput(path.display().to_string()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("key {key:?}: {v:?} is not a number")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("key {key:?}: {v:?} is not an integer")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key {key:?}: {v:?} is not an integer")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.entries
            .get(key)
            .map(|v| match v.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(Error::Config(format!("key {key:?}: {other:?} is not a bool"))),
            })
            .transpose()
    }

    /// Reject any key not present in `schema`.
    pub fn validate_keys<'a>(&self, schema: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let allowed: std::collections::BTreeSet<&str> = schema.into_iter().collect();
        for key in self.entries.keys() {
            if !allowed.contains(key.as_str()) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        Ok(())
    }

    /// Deterministic serialization (sorted keys), suitable for byte-for-byte
    /// comparison of resolved configs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let cfg = KeyValueConfig::parse("# header\n a = 1 \nb= two # trailing\n\n").unwrap();
        assert_eq!(cfg.get_f64("a").unwrap(), Some(1.0));
        assert_eq!(cfg.get_str("b"), Some("two"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = KeyValueConfig::parse("seed = 3\noops = 1\n").unwrap();
        let err = cfg.validate_keys(["seed"]).unwrap_err();
        assert!(err.to_string().contains("oops"));
    }

    #[test]
    fn to_text_is_sorted_and_stable() {
        let cfg = KeyValueConfig::parse("b = 2\na = 1\n").unwrap();
        assert_eq!(cfg.to_text(), "a = 1\nb = 2\n");
    }
}
