//! Flat `section.key = value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parsed key-value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    entries: BTreeMap<String, (String, usize)>,
    used: std::cell::RefCell<Vec<String>>,
}

impl FlatConfig {
    /// Parses `section.key = value` lines. `#` starts a comment; blank lines
    /// are ignored. Keys must contain exactly one dot and appear once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line, msg };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'section.key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let dots = key.matches('.').count();
            if dots != 1 || key.starts_with('.') || key.ends_with('.') {
                return Err(err(format!("key '{key}' must have the form section.key")));
            }
            if key.chars().any(char::is_whitespace) {
                return Err(err(format!("key '{key}' contains whitespace")));
            }
            if entries.insert(key.to_string(), (value.to_string(), line)).is_some() {
                return Err(err(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self { entries, used: Default::default() })
    }

    /// Hex SHA-256 of the canonical form: sorted `key = value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, (v, _)) in &self.entries {
            h.update(k.as_bytes());
            h.update(b" = ");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key).map(|(v, _)| v.as_str());
        if v.is_some() {
            self.used.borrow_mut().push(key.to_string());
        }
        v
    }

    /// Parses `key` if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        let line = self.entries[key].1;
        raw.parse()
            .map(Some)
            .map_err(|e| Error::Parse { line, msg: format!("{key}: {e}") })
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list under `key`.
    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.raw(key).map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
    }

    /// Fails on keys that were never read.
    pub fn reject_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        for (k, (_, line)) in &self.entries {
            if !used.contains(k) {
                return Err(Error::Parse { line: *line, msg: format!("unknown key '{k}'") });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_comments() {
        let c = FlatConfig::parse("# header\nenv.sigma = 0.2  # noise\n\nsampler.models = ddcrp, mixture:potts\n")
            .unwrap();
        assert_eq!(c.get::<f64>("env.sigma").unwrap(), Some(0.2));
        assert_eq!(c.list("sampler.models").unwrap(), vec!["ddcrp", "mixture:potts"]);
        assert_eq!(c.get_or("env.n_traj", 10usize).unwrap(), 10);
        c.reject_unused().unwrap();
    }

    #[test]
    fn reports_line_numbers() {
        let e = FlatConfig::parse("a.b = 1\nnot a pair\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = FlatConfig::parse("a.b.c = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = FlatConfig::parse("a.b = 1\na.b = 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let c = FlatConfig::parse("a.b = x\n").unwrap();
        assert!(matches!(c.get::<f64>("a.b"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn unused_keys_are_rejected() {
        let c = FlatConfig::parse("a.b = 1\nc.typo = 2\n").unwrap();
        c.get::<u32>("a.b").unwrap();
        assert!(matches!(c.reject_unused(), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn hash_ignores_order_and_formatting() {
        let a = FlatConfig::parse("a.x = 1\nb.y=2\n").unwrap();
        let b = FlatConfig::parse("# c\nb.y = 2\n  a.x =   1 \n").unwrap();
        let c = FlatConfig::parse("a.x = 1\nb.y = 3\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
