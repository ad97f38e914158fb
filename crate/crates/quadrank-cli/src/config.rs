//! Key-value config files layered under command-line flags: a flag wins
//! when both are present, file entries fill the gaps, and any key the
//! running subcommand does not consume is rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::Failure;

/// Parsed `key = value` lines. `#` starts a comment; keys are lowercased
/// with `-` and `_` interchangeable, so `height-bound` and `HEIGHT_BOUND`
/// name the same entry.
pub struct Overlay {
    values: BTreeMap<String, String>,
    source: String,
}

impl Overlay {
    pub fn empty() -> Self {
        Overlay {
            values: BTreeMap::new(),
            source: String::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let raw = fs::read_to_string(path).map_err(|e| {
            Failure::Usage(format!("cannot read config {}: {}", path.display(), e))
        })?;
        let mut values = BTreeMap::new();
        for (i, line) in raw.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Failure::Usage(format!(
                    "{} line {}: expected `key = value`",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = normalize_key(k);
            if key.is_empty() {
                return Err(Failure::Usage(format!(
                    "{} line {}: empty key",
                    path.display(),
                    i + 1
                )));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Failure::Usage(format!(
                    "{} line {}: duplicate key `{}`",
                    path.display(),
                    i + 1,
                    key
                )));
            }
        }
        Ok(Overlay {
            values,
            source: path.display().to_string(),
        })
    }

    /// The flag value when given, else the file entry for `key`.
    pub fn merge(&mut self, flag: Option<String>, key: &str) -> Option<String> {
        let file = self.values.remove(&normalize_key(key));
        flag.or(file)
    }

    /// Bool flags merge the same way; absent flag defers to the file.
    pub fn merge_flag(&mut self, flag: Option<bool>, key: &str) -> Result<bool, Failure> {
        match self.merge(flag.map(|b| b.to_string()), key) {
            None => Ok(false),
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(Failure::Usage(format!(
                    "{}: key `{}`: expected a boolean, got `{}`",
                    self.source, key, other
                ))),
            },
        }
    }

    /// Every entry must have been consumed by `merge` by the time the
    /// subcommand finishes resolving its parameters.
    pub fn finish(self) -> Result<(), Failure> {
        match self.values.into_keys().next() {
            None => Ok(()),
            Some(k) => Err(Failure::Usage(format!(
                "{}: unknown key `{}`",
                self.source, k
            ))),
        }
    }
}

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}
