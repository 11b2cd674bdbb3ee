//! Plain-text `key = value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered key/value pairs read from a config file. Keys are consumed as
/// they are read so that leftovers can be reported as unknown.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    /// Blank lines and lines starting with `#` are ignored. A repeated key is
    /// an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config("", format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return Err(Error::config(key, format!("line {}: duplicate key", i + 1)));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    pub fn take_str(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Errors on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_keys().next() {
            Some(key) => Err(Error::config(key, "unknown key")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_tracks_unknown_keys() {
        let mut kv = KeyValues::parse("# comment\nseed = 7\n\nmargin=0.5\nbogus = 1\n").unwrap();
        assert_eq!(kv.take::<u64>("seed").unwrap(), Some(7));
        assert_eq!(kv.take_or("margin", 0.0).unwrap(), 0.5);
        assert_eq!(kv.take_or("absent", 3u32).unwrap(), 3);
        match kv.finish().unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "bogus"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn rejects_malformed_and_duplicate_lines() {
        assert!(KeyValues::parse("just words").is_err());
        assert!(KeyValues::parse("a = 1\na = 2").is_err());
        let mut kv = KeyValues::parse("n = ten").unwrap();
        assert!(matches!(kv.take::<u32>("n"), Err(Error::Config { .. })));
    }
}
