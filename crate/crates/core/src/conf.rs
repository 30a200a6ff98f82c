//! Minimal `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted paths
//! (`contribution.beta.content_engaging = 0.5`). Typed getters record which
//! keys were consumed so unknown keys can be reported by name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: expected 'key = value', got '{text}'")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },
    #[error("{path}: duplicate key '{key}'")]
    DuplicateKey { path: String, key: String },
    #[error("{path}: key '{key}': {message}")]
    Value {
        path: String,
        key: String,
        message: String,
    },
    #[error("{path}: missing required key '{key}'")]
    MissingKey { path: String, key: String },
    #[error("{path}: unknown keys: {}", keys.join(", "))]
    UnknownKeys { path: String, keys: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct KvConfig {
    path: String,
    entries: BTreeMap<String, String>,
    consumed: BTreeSet<String>,
}

impl KvConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_str_named(&text, &path.display().to_string())
    }

    pub fn from_str_named(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_string(),
                line: i + 1,
                text: raw.trim().to_string(),
            })?;
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    path: path.to_string(),
                    key,
                });
            }
        }
        Ok(KvConfig {
            path: path.to_string(),
            entries,
            consumed: BTreeSet::new(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.consumed.insert(key.to_string());
        }
        v
    }

    fn value_err(&self, key: &str, message: String) -> ConfigError {
        ConfigError::Value {
            path: self.path.clone(),
            key: key.to_string(),
            message,
        }
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| self.value_err(key, format!("cannot parse '{v}' as a real"))),
            None => Err(ConfigError::MissingKey {
                path: self.path.clone(),
                key: key.to_string(),
            }),
        }
    }

    pub fn get_f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| self.value_err(key, format!("cannot parse '{v}' as a real"))),
            None => Ok(default),
        }
    }

    pub fn get_usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.raw(key) {
            Some(v) => v
                .parse()
                .map_err(|_| self.value_err(key, format!("cannot parse '{v}' as an integer"))),
            None => Ok(default),
        }
    }

    pub fn get_bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(self.value_err(key, format!("cannot parse '{other}' as a boolean"))),
            },
            None => Ok(default),
        }
    }

    pub fn get_string(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_string())
    }

    /// Comma-separated reals, e.g. `a.probs = 0.1,0.2,0.7`.
    pub fn require_f64_list(
        &mut self,
        key: &str,
        expected_len: usize,
    ) -> Result<Vec<f64>, ConfigError> {
        let raw = self.raw(key).ok_or_else(|| ConfigError::MissingKey {
            path: self.path.clone(),
            key: key.to_string(),
        })?;
        let values: Result<Vec<f64>, _> = raw.split(',').map(|p| p.trim().parse::<f64>()).collect();
        let values = values
            .map_err(|_| self.value_err(key, format!("cannot parse '{raw}' as a real list")))?;
        if values.len() != expected_len {
            return Err(self.value_err(
                key,
                format!("expected {expected_len} values, got {}", values.len()),
            ));
        }
        Ok(values)
    }

    /// Comma-separated `label:weight` pairs, e.g. `ls.levels = a:0.5,b:0.5`.
    pub fn require_weighted_levels(
        &mut self,
        key: &str,
    ) -> Result<Vec<(String, f64)>, ConfigError> {
        let raw = self.raw(key).ok_or_else(|| ConfigError::MissingKey {
            path: self.path.clone(),
            key: key.to_string(),
        })?;
        let mut out = Vec::new();
        for part in raw.split(',') {
            let (label, weight) = part.split_once(':').ok_or_else(|| {
                self.value_err(key, format!("expected 'label:weight', got '{part}'"))
            })?;
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| self.value_err(key, format!("cannot parse weight in '{part}'")))?;
            out.push((label.trim().to_string(), weight));
        }
        Ok(out)
    }

    /// All keys under `prefix.` that are still unconsumed, as `(suffix, value)`.
    pub fn take_prefixed_f64(&mut self, prefix: &str) -> Result<Vec<(String, f64)>, ConfigError> {
        let keys: Vec<String> = self
            .entries
            .keys()
            .filter(|k| k.starts_with(prefix) && !self.consumed.contains(*k))
            .cloned()
            .collect();
        let mut out = Vec::new();
        for key in keys {
            let suffix = key[prefix.len()..].to_string();
            let value = self.require_f64(&key)?;
            out.push((suffix, value));
        }
        Ok(out)
    }

    /// Error if any key was never consumed by a getter.
    pub fn finish(self) -> Result<(), ConfigError> {
        let unknown: Vec<String> = self
            .entries
            .keys()
            .filter(|k| !self.consumed.contains(*k))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys {
                path: self.path,
                keys: unknown,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let mut kv =
            KvConfig::from_str_named("a = 1.5 # trailing\n# full comment\nb.c = 2,3\n", "test")
                .unwrap();
        assert_eq!(kv.require_f64("a").unwrap(), 1.5);
        assert_eq!(kv.require_f64_list("b.c", 2).unwrap(), vec![2.0, 3.0]);
        kv.finish().unwrap();
    }

    #[test]
    fn reports_unknown_and_missing_keys() {
        let mut kv = KvConfig::from_str_named("a = 1\nzzz = 9\n", "test").unwrap();
        kv.require_f64("a").unwrap();
        assert!(matches!(
            kv.require_f64("missing"),
            Err(ConfigError::MissingKey { .. })
        ));
        match kv.finish() {
            Err(ConfigError::UnknownKeys { keys, .. }) => assert_eq!(keys, vec!["zzz"]),
            other => panic!("expected unknown-keys error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_and_duplicates() {
        assert!(matches!(
            KvConfig::from_str_named("just words\n", "t"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            KvConfig::from_str_named("a = 1\na = 2\n", "t"),
            Err(ConfigError::DuplicateKey { .. })
        ));
    }
}
