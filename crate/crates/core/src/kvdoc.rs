//! Line-oriented `key=value` documents used for persisted calibrations and
//! configuration files. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("missing key {0:?}")]
    Missing(String),
    #[error("key {key:?}: cannot parse {value:?}")]
    Value { key: String, value: String },
}

/// Parsed document. Keys keep their first line number for diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(KvError::Syntax { line: i + 1 })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(KvError::Syntax { line: i + 1 });
            }
            if entries.contains_key(&key) {
                return Err(KvError::Duplicate { line: i + 1, key });
            }
            entries.insert(key, (i + 1, v.trim().to_string()));
        }
        Ok(KvDoc { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| KvError::Value { key: key.to_string(), value: v.to_string() })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| KvError::Value { key: key.to_string(), value: v.to_string() }),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|(l, _)| *l)
    }
}

/// Ordered writer; values are written with `Display`, so `f64` round-trips.
#[derive(Debug, Default)]
pub struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn new() -> Self {
        KvWriter::default()
    }

    pub fn comment(mut self, text: &str) -> Self {
        self.out.push_str("# ");
        self.out.push_str(text);
        self.out.push('\n');
        self
    }

    pub fn put(mut self, key: &str, value: impl Display) -> Self {
        self.out.push_str(key);
        self.out.push('=');
        self.out.push_str(&value.to_string());
        self.out.push('\n');
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}
