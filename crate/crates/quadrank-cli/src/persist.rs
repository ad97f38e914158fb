//! Append-only persistence: the factor and class-group caches shared
//! across runs, the per-run verification journal that makes long censuses
//! resumable, and atomic artifact writes.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use num_bigint::{BigInt, BigUint};
use num_traits::Signed;
use serde_json::{json, Value};

use quadrank::arith::{self, FactorCache, Factorization};
use quadrank::classgroup::{AbelianGroupStructure, StructureCache};

use crate::Failure;

/// FNV-1a, used to fingerprint the normalized run configuration.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {}", path.display(), e))
}

/// Parsed lines of a JSONL file. A final line that fails to parse and is
/// not newline-terminated is dropped: it is the footprint of a run killed
/// mid-append, and discarding it is exactly the recovery we want. Any
/// other unparseable line means real corruption.
fn read_jsonl(path: &Path) -> Result<Vec<Value>, Failure> {
    let raw = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let terminated = raw.ends_with('\n');
    let lines: Vec<&str> = raw.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if i + 1 == lines.len() && !terminated => break,
            Err(e) => {
                return Err(Failure::Runtime(format!(
                    "{}: line {} is not valid JSON: {}",
                    path.display(),
                    i + 1,
                    e
                )))
            }
        }
    }
    Ok(out)
}

fn append_lines(path: &Path, lines: &[String]) -> Result<(), Failure> {
    if lines.is_empty() {
        return Ok(());
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut buf = String::new();
    for line in lines {
        buf.push_str(line);
        buf.push('\n');
    }
    file.write_all(buf.as_bytes()).map_err(|e| io_err(path, e))
}

/// Write via a sibling tmp file and rename, so a killed run never leaves a
/// half-written artifact and readers only ever see complete versions.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
    }
    let name = path
        .file_name()
        .ok_or_else(|| Failure::Usage(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Directory holding the persistent caches, `factors.jsonl` and
/// `structures.jsonl`. Entries revalidate on load; anything that fails its
/// own invariants is treated as corruption, not silently skipped.
pub struct CacheDir {
    dir: PathBuf,
}

impl CacheDir {
    pub fn open(dir: PathBuf) -> Result<Self, Failure> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(CacheDir { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn factors_path(&self) -> PathBuf {
        self.dir.join("factors.jsonl")
    }

    fn structures_path(&self) -> PathBuf {
        self.dir.join("structures.jsonl")
    }

    /// Seed the in-memory factor cache from disk. Each entry must
    /// reassemble to its key with strictly increasing prime factors.
    pub fn load_factors(&self, cache: &FactorCache) -> Result<usize, Failure> {
        let path = self.factors_path();
        if !path.exists() {
            return Ok(0);
        }
        let mut n = 0;
        for v in read_jsonl(&path)? {
            let (key, fact) = parse_factor_entry(&v)
                .ok_or_else(|| corrupt(&path, "malformed factorization entry"))?;
            if fact.value() != key {
                return Err(corrupt(&path, "factorization does not reassemble to its key"));
            }
            if fact.factors.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(corrupt(&path, "prime factors out of order"));
            }
            if !fact.factors.iter().all(|(p, e)| *e >= 1 && arith::is_prime(p)) {
                return Err(corrupt(&path, "composite factor in cache"));
            }
            cache.put(key, fact);
            n += 1;
        }
        Ok(n)
    }

    /// Append entries not in `known` (the keys present at load time).
    pub fn append_factors(
        &self,
        cache: &FactorCache,
        known: &HashSet<BigInt>,
    ) -> Result<usize, Failure> {
        let lines: Vec<String> = cache
            .entries()
            .into_iter()
            .filter(|(k, _)| !known.contains(k))
            .map(|(k, f)| {
                let factors: Vec<Value> = f
                    .factors
                    .iter()
                    .map(|(p, e)| json!([p.to_string(), e]))
                    .collect();
                json!({"factors": factors, "n": k.to_string()}).to_string()
            })
            .collect();
        append_lines(&self.factors_path(), &lines)?;
        Ok(lines.len())
    }

    /// Seed the in-memory structure cache from disk. Divisor chains must
    /// satisfy d₁ | d₂ | ... with every dᵢ ≥ 2.
    pub fn load_structures(&self, cache: &StructureCache) -> Result<usize, Failure> {
        let path = self.structures_path();
        if !path.exists() {
            return Ok(0);
        }
        let mut n = 0;
        for v in read_jsonl(&path)? {
            let (d, divisors) = parse_structure_entry(&v)
                .ok_or_else(|| corrupt(&path, "malformed structure entry"))?;
            validate_divisor_chain(&divisors)
                .map_err(|why| corrupt(&path, why))?;
            cache.put(d, AbelianGroupStructure { elementary_divisors: divisors });
            n += 1;
        }
        Ok(n)
    }

    pub fn append_structures(
        &self,
        cache: &StructureCache,
        known: &HashSet<BigInt>,
    ) -> Result<usize, Failure> {
        let lines: Vec<String> = cache
            .entries()
            .into_iter()
            .filter(|(k, _)| !known.contains(k))
            .map(|(k, s)| {
                json!({"d": k.to_string(), "divisors": s.elementary_divisors}).to_string()
            })
            .collect();
        append_lines(&self.structures_path(), &lines)?;
        Ok(lines.len())
    }
}

fn corrupt(path: &Path, why: &str) -> Failure {
    Failure::Runtime(format!("{}: {}", path.display(), why))
}

pub fn validate_divisor_chain(divisors: &[u64]) -> Result<(), &'static str> {
    if divisors.iter().any(|&d| d < 2) {
        return Err("elementary divisor below 2");
    }
    if divisors.windows(2).any(|w| w[1] % w[0] != 0) {
        return Err("elementary divisors do not form a chain");
    }
    Ok(())
}

fn parse_factor_entry(v: &Value) -> Option<(BigInt, Factorization)> {
    let n: BigInt = v.get("n")?.as_str()?.parse().ok()?;
    let arr = v.get("factors")?.as_array()?;
    let mut factors = Vec::with_capacity(arr.len());
    for pe in arr {
        let pair = pe.as_array()?;
        if pair.len() != 2 {
            return None;
        }
        let p: BigUint = pair[0].as_str()?.parse().ok()?;
        let e = u32::try_from(pair[1].as_u64()?).ok()?;
        factors.push((p, e));
    }
    let sign = if n.is_negative() { -1 } else { 1 };
    Some((n, Factorization { sign, factors }))
}

fn parse_structure_entry(v: &Value) -> Option<(BigInt, Vec<u64>)> {
    let d: BigInt = v.get("d")?.as_str()?.parse().ok()?;
    let divisors = v
        .get("divisors")?
        .as_array()?
        .iter()
        .map(Value::as_u64)
        .collect::<Option<Vec<u64>>>()?;
    Some((d, divisors))
}

/// Append-only verification journal. The first line pins the configuration
/// fingerprint; each later line records one verified field keyed by its
/// core t, so a killed run resumes by replaying the file and skipping the
/// keys already present.
pub struct Journal {
    file: File,
    entries: BTreeMap<String, Value>,
    reused: usize,
}

impl Journal {
    pub fn open(path: &Path, config_hash: u64) -> Result<Self, Failure> {
        let hash = format!("{:016x}", config_hash);
        let existing = match fs::metadata(path) {
            Ok(m) if m.len() > 0 => read_jsonl(path)?,
            _ => Vec::new(),
        };
        let mut entries = BTreeMap::new();
        match existing.split_first() {
            None => {
                // fresh journal, or one whose only content was a torn
                // header write; start over either way
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
                    }
                }
                let mut file = File::create(path).map_err(|e| io_err(path, e))?;
                let header = json!({"config_hash": hash, "schema": 1});
                file.write_all(format!("{}\n", header).as_bytes())
                    .map_err(|e| io_err(path, e))?;
                Ok(Journal { file, entries, reused: 0 })
            }
            Some((head, rest)) => {
                let found = head.get("config_hash").and_then(Value::as_str);
                if found != Some(hash.as_str()) {
                    return Err(Failure::Usage(format!(
                        "journal {} belongs to a different configuration \
                         (found {}, expected {}); remove it or pass another --journal",
                        path.display(),
                        found.unwrap_or("<missing>"),
                        hash
                    )));
                }
                for v in rest {
                    let t = v
                        .get("t")
                        .and_then(Value::as_str)
                        .ok_or_else(|| corrupt(path, "journal entry without a t key"))?;
                    entries.insert(t.to_string(), v.clone());
                }
                let file = OpenOptions::new()
                    .append(true)
                    .open(path)
                    .map_err(|e| io_err(path, e))?;
                Ok(Journal { file, entries, reused: 0 })
            }
        }
    }

    /// Previously journaled entry for this core, counting the hit.
    pub fn lookup(&mut self, t: &str) -> Option<Value> {
        let hit = self.entries.get(t).cloned();
        if hit.is_some() {
            self.reused += 1;
        }
        hit
    }

    /// Entries replayed from an earlier run and consumed via `lookup`.
    pub fn reused(&self) -> usize {
        self.reused
    }

    pub fn record(&mut self, value: Value) -> Result<(), Failure> {
        let t = value
            .get("t")
            .and_then(Value::as_str)
            .expect("journal entries are keyed by t")
            .to_string();
        self.file
            .write_all(format!("{}\n", value).as_bytes())
            .map_err(|e| Failure::Runtime(format!("journal append failed: {}", e)))?;
        self.entries.insert(t, value);
        Ok(())
    }
}
