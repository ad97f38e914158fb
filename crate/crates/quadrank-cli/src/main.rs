//! quadrank: specialize hyperelliptic curves into quadratic fields with
//! guaranteed class-group m-rank, verify the guarantee, and census the
//! results. Every run echoes its normalized configuration to stderr;
//! census and verify runs persist through append-only JSONL so they can be
//! killed and resumed without changing the final artifacts.

mod config;
mod persist;

use std::collections::HashSet;
use std::env;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use quadrank::arith::{self, FactorCache};
use quadrank::census::{self, decade_checkpoints, growth_fit, CensusSeries, GrowthFit};
use quadrank::classgroup::{self, AbelianGroupStructure, ClassGroupError, StructureCache};
use quadrank::forms::{BinaryForm, Polynomial};
use quadrank::localize::{build_gadget, PlaceSet};
use quadrank::specialize::{
    catalog_curve, default_bad_primes, enumerate_specializations, CurveSpec, RecordStatus, Sign,
    SpecializationRecord,
};

use config::Overlay;
use persist::{fnv1a64, write_atomic, CacheDir, Journal};

/// Failures mapped onto the exit codes: usage 2, capacity 3, and 4 for
/// runs that die after leaving partial artifacts behind.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Capacity(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Capacity(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Capacity(m) | Failure::Runtime(m) => m,
        }
    }
}

fn classgroup_failure(d: &BigInt, e: ClassGroupError) -> Failure {
    match e {
        ClassGroupError::Capacity => {
            Failure::Capacity(format!("class group of d = {}: {}", d, e))
        }
        other => Failure::Usage(format!("class group of d = {}: {}", d, other)),
    }
}

impl From<census::CensusError> for Failure {
    fn from(e: census::CensusError) -> Failure {
        match e {
            census::CensusError::ClassGroup(ClassGroupError::Capacity) => {
                Failure::Capacity(e.to_string())
            }
            other => Failure::Usage(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "quadrank",
    version,
    about = "quadratic fields with prescribed class-group rank, from hyperelliptic specializations"
)]
struct Cli {
    /// `key = value` config file; command-line flags override file entries
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// directory for the persistent factor and class-group caches
    /// (defaults to $QUADRANK_CACHE_DIR when set)
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Factor an integer
    Factor {
        #[arg(value_name = "N", allow_hyphen_values = true)]
        n: Option<String>,
    },
    /// k-free decomposition n = t * z^k with t k-free
    Kfree {
        #[arg(value_name = "N", allow_hyphen_values = true)]
        n: Option<String>,
        /// power to extract (default 2)
        #[arg(long)]
        k: Option<String>,
    },
    /// Class group of a fundamental discriminant (narrow group when d > 0)
    Classgroup {
        #[arg(long, allow_hyphen_values = true, value_name = "D")]
        disc: Option<String>,
    },
    /// Residue gadget forcing |t|_v < epsilon at the chosen places
    Gadget {
        /// comma-separated finite primes of the place set
        #[arg(long, value_name = "P,Q,...")]
        primes: Option<String>,
        /// include the archimedean place
        #[arg(long, action = ArgAction::Count)]
        archimedean: u8,
        /// bound to enforce, a positive rational (default 1/10)
        #[arg(long)]
        epsilon: Option<String>,
    },
    /// Enumerate specializations of a curve as quadratic fields, JSONL per record
    Fields {
        /// catalog name (family, lsw-genus4) or a curve file path
        #[arg(long)]
        curve: Option<String>,
        /// catalog curve parameters, e.g. 2,2 for family
        #[arg(long, allow_hyphen_values = true, value_name = "A,B,...")]
        params: Option<String>,
        /// neg for imaginary fields, pos for real
        #[arg(long)]
        sign: Option<String>,
        /// bound on the denominator s of the specialization points
        #[arg(long)]
        height_bound: Option<String>,
        /// ramification set: `auto` (primes of disc f), `none`, or a list like 2,3
        #[arg(long, value_name = "SPEC")]
        bad_primes: Option<String>,
        /// verify class-group ranks for fields within --disc-bound
        #[arg(long, action = ArgAction::Count)]
        verify: u8,
        /// rank modulus used when verifying (default: the curve's torsion modulus)
        #[arg(long)]
        m: Option<String>,
        /// only verify fields with |d| at most this (default 1e13)
        #[arg(long)]
        disc_bound: Option<String>,
        /// write records here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<String>,
    },
    /// Census of k-free cores of a binary form over a box, CSV per checkpoint
    Census {
        /// form coefficients c0,c1,...,cd with F = sum c_i X^i Y^(d-i)
        #[arg(long, allow_hyphen_values = true, value_name = "C0,C1,...")]
        form: Option<String>,
        /// declared degree; the coefficient count must be degree + 1
        #[arg(long)]
        degree: Option<String>,
        /// power defining k-free (default 2)
        #[arg(long)]
        k: Option<String>,
        /// census bound on |t|
        #[arg(long)]
        x: Option<String>,
        /// residue modulus constraining the box (default 1)
        #[arg(long = "mod", value_name = "M")]
        modulus: Option<String>,
        /// residue of a mod M (default 0)
        #[arg(long)]
        a: Option<String>,
        /// residue of b mod M (default 0)
        #[arg(long)]
        b: Option<String>,
        /// grid shards swept in parallel (default 1)
        #[arg(long)]
        workers: Option<String>,
        /// exponent hypothesis for the fitted constant (default 2/degree)
        #[arg(long)]
        exponent: Option<String>,
        /// log power in the fitted lower bound (default 2)
        #[arg(long)]
        log_power: Option<String>,
        /// write the CSV here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<String>,
    },
    /// Field census with class-group verification: CSV series + JSONL records
    Verify {
        /// catalog name (family, lsw-genus4) or a curve file path
        #[arg(long)]
        curve: Option<String>,
        /// catalog curve parameters, e.g. 2,2 for family
        #[arg(long, allow_hyphen_values = true, value_name = "A,B,...")]
        params: Option<String>,
        /// neg for imaginary fields, pos for real
        #[arg(long)]
        sign: Option<String>,
        /// rank modulus m of the class groups
        #[arg(long)]
        m: Option<String>,
        /// rank target: count fields with rk_m at least this
        #[arg(long)]
        rank: Option<String>,
        /// verify fields with |d| up to this bound
        #[arg(long)]
        disc_bound: Option<String>,
        /// bound on the denominator s of the specialization points (default 60)
        #[arg(long)]
        height_bound: Option<String>,
        /// ramification set: `auto`, `none`, or a list like 2,3
        #[arg(long, value_name = "SPEC")]
        bad_primes: Option<String>,
        /// exponent hypothesis for the fitted constant (default 1/(genus+1))
        #[arg(long)]
        exponent: Option<String>,
        /// log power in the fitted lower bound (default 2)
        #[arg(long)]
        log_power: Option<String>,
        /// artifact base path: writes BASE.csv and BASE.jsonl (default `verify`)
        #[arg(long, value_name = "BASE")]
        output: Option<String>,
        /// append-only journal enabling kill-and-resume
        #[arg(long, value_name = "FILE")]
        journal: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("quadrank: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut overlay = match &cli.config {
        Some(p) => Overlay::load(p)?,
        None => Overlay::empty(),
    };
    let cache = open_cache(cli.cache_dir, &mut overlay)?;
    match cli.cmd {
        Cmd::Factor { n } => cmd_factor(n, overlay, cache),
        Cmd::Kfree { n, k } => cmd_kfree(n, k, overlay, cache),
        Cmd::Classgroup { disc } => cmd_classgroup(disc, overlay, cache),
        Cmd::Gadget { primes, archimedean, epsilon } => {
            cmd_gadget(primes, (archimedean > 0).then_some(true), epsilon, overlay)
        }
        Cmd::Fields {
            curve,
            params,
            sign,
            height_bound,
            bad_primes,
            verify,
            m,
            disc_bound,
            output,
        } => cmd_fields(
            curve,
            params,
            sign,
            height_bound,
            bad_primes,
            (verify > 0).then_some(true),
            m,
            disc_bound,
            output,
            overlay,
            cache,
        ),
        Cmd::Census {
            form,
            degree,
            k,
            x,
            modulus,
            a,
            b,
            workers,
            exponent,
            log_power,
            output,
        } => cmd_census(
            form, degree, k, x, modulus, a, b, workers, exponent, log_power, output, overlay,
        ),
        Cmd::Verify {
            curve,
            params,
            sign,
            m,
            rank,
            disc_bound,
            height_bound,
            bad_primes,
            exponent,
            log_power,
            output,
            journal,
        } => cmd_verify(
            curve,
            params,
            sign,
            m,
            rank,
            disc_bound,
            height_bound,
            bad_primes,
            exponent,
            log_power,
            output,
            journal,
            overlay,
            cache,
        ),
    }
}

// ---- parameter resolution ----------------------------------------------

fn flag_name(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

fn req<T>(
    raw: Option<String>,
    key: &str,
    parse: impl FnOnce(&str) -> Result<T, String>,
) -> Result<T, Failure> {
    match raw {
        None => Err(Failure::Usage(format!(
            "missing required {} (or config key `{}`)",
            flag_name(key),
            key
        ))),
        Some(s) => {
            parse(&s).map_err(|e| Failure::Usage(format!("{}: {}", flag_name(key), e)))
        }
    }
}

fn opt<T>(
    raw: Option<String>,
    key: &str,
    parse: impl FnOnce(&str) -> Result<T, String>,
) -> Result<Option<T>, Failure> {
    match raw {
        None => Ok(None),
        Some(s) => parse(&s)
            .map(Some)
            .map_err(|e| Failure::Usage(format!("{}: {}", flag_name(key), e))),
    }
}

/// Nonnegative integer, plain or in scientific notation like 1e12 or 2.5e9
/// (the result must still be an integer).
fn parse_scale(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let (mantissa, exp) = s
        .split_once(['e', 'E'])
        .ok_or_else(|| format!("`{}` is not a nonnegative integer", s))?;
    let exp: u32 = exp
        .parse()
        .map_err(|_| format!("`{}` has a malformed exponent", s))?;
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if (frac_part.len() as u32) > exp {
        return Err(format!("`{}` is not an integer", s));
    }
    let digits = format!("{}{}", int_part, frac_part);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("`{}` is not a nonnegative integer", s));
    }
    let mut v: u128 = digits
        .parse()
        .map_err(|_| format!("`{}` is out of range", s))?;
    for _ in 0..exp - frac_part.len() as u32 {
        v = v
            .checked_mul(10)
            .ok_or_else(|| format!("`{}` is out of range", s))?;
    }
    u64::try_from(v).map_err(|_| format!("`{}` is out of range", s))
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a nonnegative integer", s))
}

fn parse_u32(s: &str) -> Result<u32, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a nonnegative integer", s))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a nonnegative integer", s))
}

fn parse_i32(s: &str) -> Result<i32, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not an integer", s))
}

fn parse_bigint(s: &str) -> Result<BigInt, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{}` is not an integer", s))
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    match s.trim() {
        "neg" | "negative" | "-" => Ok(Sign::Negative),
        "pos" | "positive" | "+" => Ok(Sign::Positive),
        other => Err(format!("`{}` is not a sign (use neg or pos)", other)),
    }
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(vec![]);
    }
    s.split(',').map(|item| parse(item.trim())).collect()
}

fn parse_primes(s: &str) -> Result<Vec<u64>, String> {
    parse_list(s, parse_u64)
}

fn parse_params(s: &str) -> Result<Vec<i64>, String> {
    parse_list(s, |item| {
        item.parse()
            .map_err(|_| format!("`{}` is not an integer", item))
    })
}

/// Positive rational, `p/q` or an integer.
fn parse_ratio(s: &str) -> Result<BigRational, String> {
    let r: BigRational = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a rational (use p/q)", s))?;
    if r.is_positive() {
        Ok(r)
    } else {
        Err(format!("`{}` must be positive", s))
    }
}

/// Exponent hypothesis: `p/q`, or a plain float like 0.5.
fn parse_exponent(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", s))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", s))?;
        if q == 0.0 {
            return Err(format!("`{}` divides by zero", s));
        }
        return Ok(p / q);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{}` is not a number", s))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s))
    }
}

// ---- shared plumbing ----------------------------------------------------

fn echo_config(v: Value) {
    eprintln!("config: {}", v);
}

fn json_int(n: &BigInt) -> Value {
    match n.to_i64() {
        Some(v) => Value::from(v),
        None => Value::from(n.to_string()),
    }
}

fn open_cache(flag: Option<PathBuf>, overlay: &mut Overlay) -> Result<Option<CacheDir>, Failure> {
    let merged = overlay
        .merge(flag.map(|p| p.display().to_string()), "cache_dir")
        .or_else(|| env::var("QUADRANK_CACHE_DIR").ok());
    match merged {
        None => Ok(None),
        Some(dir) => CacheDir::open(PathBuf::from(dir)).map(Some),
    }
}

fn cache_label(cache: &Option<CacheDir>) -> Value {
    match cache {
        None => Value::Null,
        Some(c) => Value::from(c.dir().display().to_string()),
    }
}

fn load_structure_cache(
    cache: &Option<CacheDir>,
    sc: &StructureCache,
) -> Result<HashSet<BigInt>, Failure> {
    if let Some(dir) = cache {
        let n = dir.load_structures(sc)?;
        if n > 0 {
            eprintln!("cache: loaded {} class-group structures", n);
        }
    }
    Ok(sc.entries().into_iter().map(|(k, _)| k).collect())
}

fn persist_structure_cache(
    cache: &Option<CacheDir>,
    sc: &StructureCache,
    known: &HashSet<BigInt>,
) -> Result<(), Failure> {
    if let Some(dir) = cache {
        let n = dir.append_structures(sc, known)?;
        if n > 0 {
            eprintln!("cache: appended {} class-group structures", n);
        }
    }
    Ok(())
}

fn resolve_curve(spec: &str, params: &[i64]) -> Result<CurveSpec, Failure> {
    let path = Path::new(spec);
    if spec.contains('/') || spec.contains('.') || path.is_file() {
        if !params.is_empty() {
            return Err(Failure::Usage(
                "curve parameters apply only to catalog curves".into(),
            ));
        }
        load_curve_file(path)
    } else {
        catalog_curve(spec, params).map_err(|e| Failure::Usage(e.to_string()))
    }
}

/// Curve files are `key = value` text: `coeffs` (constant term first),
/// `m`, `rank`, and an optional `name`.
fn load_curve_file(path: &Path) -> Result<CurveSpec, Failure> {
    let mut ov = Overlay::load(path)?;
    let coeffs_raw = ov.merge(None, "coeffs").ok_or_else(|| {
        Failure::Usage(format!("{}: missing `coeffs`", path.display()))
    })?;
    let m = req(ov.merge(None, "m"), "m", parse_u64)?;
    let rank = req(ov.merge(None, "rank"), "rank", parse_u32)?;
    let name = ov.merge(None, "name").unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    });
    ov.finish()?;
    let coeffs = parse_list(&coeffs_raw, |item| {
        item.parse::<BigRational>()
            .map_err(|_| format!("`{}` is not a rational coefficient", item))
    })
    .map_err(|e| Failure::Usage(format!("{}: coeffs: {}", path.display(), e)))?;
    CurveSpec::new(Polynomial::new(coeffs), m, rank, name)
        .map_err(|e| Failure::Usage(format!("{}: {}", path.display(), e)))
}

fn resolve_bad_primes(spec: Option<String>, curve: &CurveSpec) -> Result<Vec<u64>, Failure> {
    match spec.as_deref().map(str::trim) {
        None | Some("auto") => {
            default_bad_primes(curve).map_err(|e| Failure::Usage(e.to_string()))
        }
        Some("none") => Ok(vec![]),
        Some(list) => parse_primes(list)
            .map_err(|e| Failure::Usage(format!("--bad-primes: {}", e))),
    }
}

fn record_json(rec: &SpecializationRecord) -> Value {
    json!({
        "x0": rec.x0.to_string(),
        "height": json_int(&rec.height()),
        "raw": json_int(&rec.raw_value),
        "t": json_int(&rec.t),
        "d": json_int(&rec.d_field),
        "predicted_rank": rec.predicted_rank,
        "verified_rank": rec.verified_rank,
        "status": rec.status.as_str(),
    })
}

/// Verify each record with |d| within the bound, preferring journaled
/// results over recomputation. Returns (confirmed, refuted).
fn verify_records(
    records: &mut [SpecializationRecord],
    disc_bound: u64,
    m: u64,
    rank_target: u32,
    sc: &StructureCache,
    mut journal: Option<&mut Journal>,
) -> Result<(u64, u64), Failure> {
    let cap = BigInt::from(disc_bound);
    let mut confirmed = 0u64;
    let mut refuted = 0u64;
    for rec in records.iter_mut() {
        if rec.d_field.abs() > cap {
            continue;
        }
        let key = rec.t.to_string();
        let divisors: Vec<u64> = match journal.as_mut().and_then(|j| j.lookup(&key)) {
            Some(entry) => {
                let ds = entry
                    .get("divisors")
                    .and_then(Value::as_array)
                    .and_then(|a| a.iter().map(Value::as_u64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| {
                        Failure::Runtime(format!("journal entry for t = {} is malformed", key))
                    })?;
                persist::validate_divisor_chain(&ds)
                    .map_err(|why| Failure::Runtime(format!("journal entry for t = {}: {}", key, why)))?;
                ds
            }
            None => {
                let s = classgroup::group_structure_cached(sc, &rec.d_field)
                    .map_err(|e| classgroup_failure(&rec.d_field, e))?;
                if let Some(j) = journal.as_mut() {
                    j.record(json!({
                        "d": rec.d_field.to_string(),
                        "divisors": s.elementary_divisors,
                        "t": key,
                    }))?;
                }
                s.elementary_divisors
            }
        };
        let structure = AbelianGroupStructure { elementary_divisors: divisors };
        let rank = classgroup::m_rank(&structure, m)
            .map_err(|e| classgroup_failure(&rec.d_field, e))?;
        rec.verified_rank = Some(rank);
        if rank >= rank_target {
            rec.status = RecordStatus::Verified;
            confirmed += 1;
        } else {
            rec.status = RecordStatus::Refuted;
            refuted += 1;
        }
    }
    Ok((confirmed, refuted))
}

/// Decade census of verified records by |d|.
fn verified_series(records: &[SpecializationRecord], disc_bound: u64) -> CensusSeries {
    let mut discs: Vec<u64> = records
        .iter()
        .filter(|r| r.status == RecordStatus::Verified)
        .map(|r| r.d_field.abs().to_u64().expect("bounded by disc_bound"))
        .collect();
    discs.sort_unstable();
    let checkpoints = decade_checkpoints(disc_bound)
        .into_iter()
        .map(|x| (x, discs.partition_point(|&d| d <= x) as u64))
        .collect();
    CensusSeries::new(checkpoints).expect("nondecreasing by construction")
}

fn render_csv(series: &CensusSeries, fit: &GrowthFit, refuted_fraction: f64) -> String {
    let mut out = String::from("checkpoint,count,slope,constant,refuted_fraction\n");
    let (slope, constant) = if fit.sufficient {
        (format!("{:.6}", fit.slope), format!("{:.6}", fit.constant))
    } else {
        (String::new(), String::new())
    };
    for &(x, c) in series.points() {
        writeln!(out, "{},{},{},{},{:.6}", x, c, slope, constant, refuted_fraction).unwrap();
    }
    out
}

fn refuted_fraction(confirmed: u64, refuted: u64) -> f64 {
    if confirmed + refuted == 0 {
        0.0
    } else {
        refuted as f64 / (confirmed + refuted) as f64
    }
}

fn emit(output: Option<&str>, contents: &str) -> Result<(), Failure> {
    match output {
        Some(path) => write_atomic(Path::new(path), contents),
        None => {
            print!("{}", contents);
            Ok(())
        }
    }
}

// ---- subcommands ---------------------------------------------------------

fn cmd_factor(
    n: Option<String>,
    mut ov: Overlay,
    cache: Option<CacheDir>,
) -> Result<(), Failure> {
    let n = req(ov.merge(n, "n"), "n", parse_bigint)?;
    ov.finish()?;
    echo_config(json!({
        "cache_dir": cache_label(&cache),
        "n": n.to_string(),
        "subcommand": "factor",
    }));
    let fc = FactorCache::new();
    if let Some(dir) = &cache {
        let loaded = dir.load_factors(&fc)?;
        if loaded > 0 {
            eprintln!("cache: loaded {} factorizations", loaded);
        }
    }
    let known: HashSet<BigInt> = fc.entries().into_iter().map(|(k, _)| k).collect();
    let f = arith::factor_cached(&fc, &n).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut parts: Vec<String> = Vec::new();
    if f.sign < 0 {
        parts.push("-1".into());
    }
    for (p, e) in &f.factors {
        parts.push(if *e == 1 {
            p.to_string()
        } else {
            format!("{}^{}", p, e)
        });
    }
    if parts.is_empty() {
        parts.push("1".into());
    }
    println!("{} = {}", n, parts.join(" * "));
    if let Some(dir) = &cache {
        dir.append_factors(&fc, &known)?;
    }
    Ok(())
}

fn cmd_kfree(
    n: Option<String>,
    k: Option<String>,
    mut ov: Overlay,
    cache: Option<CacheDir>,
) -> Result<(), Failure> {
    let n = req(ov.merge(n, "n"), "n", parse_bigint)?;
    let k = opt(ov.merge(k, "k"), "k", parse_u32)?.unwrap_or(2);
    ov.finish()?;
    echo_config(json!({
        "cache_dir": cache_label(&cache),
        "k": k,
        "n": n.to_string(),
        "subcommand": "kfree",
    }));
    let fc = FactorCache::new();
    if let Some(dir) = &cache {
        dir.load_factors(&fc)?;
    }
    let known: HashSet<BigInt> = fc.entries().into_iter().map(|(k, _)| k).collect();
    if !n.is_zero() {
        arith::factor_cached(&fc, &n).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let dec = arith::kfree_part(&n, k).map_err(|e| Failure::Usage(e.to_string()))?;
    println!("t={} z={}", dec.t, dec.z);
    if let Some(dir) = &cache {
        dir.append_factors(&fc, &known)?;
    }
    Ok(())
}

fn cmd_classgroup(
    disc: Option<String>,
    mut ov: Overlay,
    cache: Option<CacheDir>,
) -> Result<(), Failure> {
    let d = req(ov.merge(disc, "disc"), "disc", parse_bigint)?;
    ov.finish()?;
    echo_config(json!({
        "cache_dir": cache_label(&cache),
        "disc": d.to_string(),
        "subcommand": "classgroup",
    }));
    let sc = StructureCache::new();
    let known = load_structure_cache(&cache, &sc)?;
    let s = classgroup::group_structure_cached(&sc, &d)
        .map_err(|e| classgroup_failure(&d, e))?;
    let mut line = json!({
        "d": json_int(&d),
        "divisors": s.elementary_divisors,
        "h": s.order(),
    });
    for m in [2u64, 3, 5, 7] {
        let rank = classgroup::m_rank(&s, m).map_err(|e| classgroup_failure(&d, e))?;
        line[format!("rk_{}", m)] = Value::from(rank);
    }
    println!("{}", line);
    persist_structure_cache(&cache, &sc, &known)?;
    Ok(())
}

fn cmd_gadget(
    primes: Option<String>,
    archimedean: Option<bool>,
    epsilon: Option<String>,
    mut ov: Overlay,
) -> Result<(), Failure> {
    let primes = opt(ov.merge(primes, "primes"), "primes", parse_primes)?.unwrap_or_default();
    let archimedean = ov.merge_flag(archimedean, "archimedean")?;
    let epsilon = opt(ov.merge(epsilon, "epsilon"), "epsilon", parse_ratio)?
        .unwrap_or_else(|| BigRational::new(BigInt::from(1), BigInt::from(10)));
    ov.finish()?;
    echo_config(json!({
        "archimedean": archimedean,
        "epsilon": epsilon.to_string(),
        "primes": primes,
        "subcommand": "gadget",
    }));
    let places = PlaceSet::new(&primes, archimedean)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let gadget = build_gadget(&places, &epsilon);
    println!("{}", gadget.summary());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_fields(
    curve: Option<String>,
    params: Option<String>,
    sign: Option<String>,
    height_bound: Option<String>,
    bad_primes: Option<String>,
    verify: Option<bool>,
    m: Option<String>,
    disc_bound: Option<String>,
    output: Option<String>,
    mut ov: Overlay,
    cache: Option<CacheDir>,
) -> Result<(), Failure> {
    let curve_name = req(ov.merge(curve, "curve"), "curve", |s| Ok(s.to_string()))?;
    let params = opt(ov.merge(params, "params"), "params", parse_params)?.unwrap_or_default();
    let sign = req(ov.merge(sign, "sign"), "sign", parse_sign)?;
    let height_bound = req(ov.merge(height_bound, "height_bound"), "height_bound", parse_scale)?;
    let bad_primes_spec = ov.merge(bad_primes, "bad_primes");
    let verify = ov.merge_flag(verify, "verify")?;
    let m = opt(ov.merge(m, "m"), "m", parse_u64)?;
    let disc_bound =
        opt(ov.merge(disc_bound, "disc_bound"), "disc_bound", parse_scale)?
            .unwrap_or(10_u64.pow(13));
    let output = ov.merge(output, "output");
    ov.finish()?;

    let curve = resolve_curve(&curve_name, &params)?;
    let s_primes = resolve_bad_primes(bad_primes_spec, &curve)?;
    let m = m.unwrap_or(curve.m);
    if m < 2 {
        return Err(Failure::Usage("--m: rank modulus must be at least 2".into()));
    }
    echo_config(json!({
        "bad_primes": s_primes,
        "cache_dir": cache_label(&cache),
        "curve": curve_name,
        "disc_bound": disc_bound,
        "height_bound": height_bound,
        "m": m,
        "output": output,
        "params": params,
        "sign": sign.as_str(),
        "subcommand": "fields",
        "verify": verify,
    }));

    let enumeration = enumerate_specializations(&curve, &s_primes, sign, height_bound)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut records = enumeration.records;

    if verify {
        let sc = StructureCache::new();
        let known = load_structure_cache(&cache, &sc)?;
        let outcome = verify_records(&mut records, disc_bound, m, curve.claimed_torsion_rank, &sc, None);
        persist_structure_cache(&cache, &sc, &known)?;
        let (confirmed, refuted) = outcome?;
        eprintln!(
            "verified: {} confirmed, {} refuted, {} beyond the disc bound",
            confirmed,
            refuted,
            records.len() as u64 - confirmed - refuted
        );
    }

    let mut out = String::new();
    for rec in &records {
        writeln!(out, "{}", record_json(rec)).unwrap();
    }
    emit(output.as_deref(), &out)?;
    eprintln!(
        "fields: {} records ({} duplicate, {} degenerate), shift {}, modulus {}",
        records.len(),
        enumeration.duplicates,
        enumeration.degenerate,
        enumeration.shift,
        enumeration.modulus
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_census(
    form: Option<String>,
    degree: Option<String>,
    k: Option<String>,
    x: Option<String>,
    modulus: Option<String>,
    a: Option<String>,
    b: Option<String>,
    workers: Option<String>,
    exponent: Option<String>,
    log_power: Option<String>,
    output: Option<String>,
    mut ov: Overlay,
) -> Result<(), Failure> {
    let coeffs = req(ov.merge(form, "form"), "form", |s| {
        parse_list(s, parse_bigint)
    })?;
    let degree = opt(ov.merge(degree, "degree"), "degree", parse_usize)?;
    let k = opt(ov.merge(k, "k"), "k", parse_u32)?.unwrap_or(2);
    let x = req(ov.merge(x, "x"), "x", parse_scale)?;
    let modulus = opt(ov.merge(modulus, "mod"), "mod", parse_u64)?.unwrap_or(1);
    let a = opt(ov.merge(a, "a"), "a", parse_u64)?.unwrap_or(0);
    let b = opt(ov.merge(b, "b"), "b", parse_u64)?.unwrap_or(0);
    let workers = opt(ov.merge(workers, "workers"), "workers", parse_usize)?.unwrap_or(1);
    let exponent_raw = opt(ov.merge(exponent, "exponent"), "exponent", parse_exponent)?;
    let log_power = opt(ov.merge(log_power, "log_power"), "log_power", parse_i32)?.unwrap_or(2);
    let output = ov.merge(output, "output");
    ov.finish()?;

    if coeffs.len() < 2 {
        return Err(Failure::Usage(
            "--form: need at least two coefficients".into(),
        ));
    }
    if let Some(deg) = degree {
        if coeffs.len() != deg + 1 {
            return Err(Failure::Usage(format!(
                "--form has {} coefficients but degree {} requires {}",
                coeffs.len(),
                deg,
                deg + 1
            )));
        }
    }
    if workers == 0 {
        return Err(Failure::Usage("--workers: must be at least 1".into()));
    }
    let form = BinaryForm::new(coeffs);
    let exponent = exponent_raw.unwrap_or(2.0 / form.degree() as f64);
    echo_config(json!({
        "a": a,
        "b": b,
        "degree": form.degree(),
        "exponent": exponent,
        "form": form.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "k": k,
        "log_power": log_power,
        "mod": modulus,
        "output": output,
        "subcommand": "census",
        "workers": workers,
        "x": x,
    }));

    let series = census::s_k_series(&form, x, k, modulus, a, b, workers)?;
    let fit = growth_fit(&series, exponent, log_power);
    emit(output.as_deref(), &render_csv(&series, &fit, 0.0))?;
    if fit.sufficient {
        eprintln!(
            "census: final count {} at x = {}; slope {:.6}, constant {:.6} over {} checkpoints",
            series.final_count(),
            x,
            fit.slope,
            fit.constant,
            fit.points
        );
    } else {
        eprintln!(
            "census: final count {} at x = {}; {} positive checkpoints, not enough to fit",
            series.final_count(),
            x,
            fit.points
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    curve: Option<String>,
    params: Option<String>,
    sign: Option<String>,
    m: Option<String>,
    rank: Option<String>,
    disc_bound: Option<String>,
    height_bound: Option<String>,
    bad_primes: Option<String>,
    exponent: Option<String>,
    log_power: Option<String>,
    output: Option<String>,
    journal: Option<String>,
    mut ov: Overlay,
    cache: Option<CacheDir>,
) -> Result<(), Failure> {
    let curve_name = req(ov.merge(curve, "curve"), "curve", |s| Ok(s.to_string()))?;
    let params = opt(ov.merge(params, "params"), "params", parse_params)?.unwrap_or_default();
    let sign = req(ov.merge(sign, "sign"), "sign", parse_sign)?;
    let m = req(ov.merge(m, "m"), "m", parse_u64)?;
    let rank_target = req(ov.merge(rank, "rank"), "rank", parse_u32)?;
    let disc_bound = req(ov.merge(disc_bound, "disc_bound"), "disc_bound", parse_scale)?;
    let height_bound =
        opt(ov.merge(height_bound, "height_bound"), "height_bound", parse_scale)?.unwrap_or(60);
    let bad_primes_spec = ov.merge(bad_primes, "bad_primes");
    let exponent_raw = opt(ov.merge(exponent, "exponent"), "exponent", parse_exponent)?;
    let log_power = opt(ov.merge(log_power, "log_power"), "log_power", parse_i32)?.unwrap_or(2);
    let output = ov.merge(output, "output").unwrap_or_else(|| "verify".into());
    let journal_path = ov.merge(journal, "journal");
    ov.finish()?;

    if m < 2 {
        return Err(Failure::Usage("--m: rank modulus must be at least 2".into()));
    }
    if rank_target < 1 {
        return Err(Failure::Usage("--rank: target must be at least 1".into()));
    }
    if disc_bound == 0 {
        return Err(Failure::Usage("--disc-bound: must be at least 1".into()));
    }
    let curve = resolve_curve(&curve_name, &params)?;
    let s_primes = resolve_bad_primes(bad_primes_spec, &curve)?;
    let exponent = exponent_raw.unwrap_or(1.0 / (curve.genus as f64 + 1.0));

    echo_config(json!({
        "bad_primes": s_primes,
        "cache_dir": cache_label(&cache),
        "curve": curve_name,
        "disc_bound": disc_bound,
        "exponent": exponent,
        "height_bound": height_bound,
        "journal": journal_path,
        "log_power": log_power,
        "m": m,
        "output": output,
        "params": params,
        "rank": rank_target,
        "sign": sign.as_str(),
        "subcommand": "verify",
    }));

    // the journal is keyed by what determines the per-field work, not by
    // artifact paths or fit parameters, so re-fitting reuses the records
    let work = json!({
        "bad_primes": s_primes,
        "coeffs": curve.f.coeffs().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "disc_bound": disc_bound,
        "height_bound": height_bound,
        "m": m,
        "rank": rank_target,
        "sign": sign.as_str(),
        "subcommand": "verify",
    });
    let fingerprint = fnv1a64(work.to_string().as_bytes());
    let mut journal = match &journal_path {
        Some(p) => Some(Journal::open(Path::new(p), fingerprint)?),
        None => None,
    };

    let enumeration = enumerate_specializations(&curve, &s_primes, sign, height_bound)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut records = enumeration.records;

    let sc = StructureCache::new();
    let known = load_structure_cache(&cache, &sc)?;
    let outcome = verify_records(
        &mut records,
        disc_bound,
        m,
        rank_target,
        &sc,
        journal.as_mut(),
    );
    // salvage finished class-group work even when aborting on capacity
    persist_structure_cache(&cache, &sc, &known)?;
    let (confirmed, refuted) = outcome?;

    let series = verified_series(&records, disc_bound);
    let fit = growth_fit(&series, exponent, log_power);
    let fraction = refuted_fraction(confirmed, refuted);

    let csv_path = format!("{}.csv", output);
    let jsonl_path = format!("{}.jsonl", output);
    let mut jsonl = String::new();
    for rec in &records {
        writeln!(jsonl, "{}", record_json(rec)).unwrap();
    }
    write_atomic(Path::new(&jsonl_path), &jsonl)?;
    write_atomic(Path::new(&csv_path), &render_csv(&series, &fit, fraction))?;

    if let Some(j) = &journal {
        eprintln!(
            "journal: {} reused, {} computed",
            j.reused(),
            confirmed + refuted - j.reused() as u64
        );
    }
    eprintln!(
        "verify: {} records, {} confirmed rk_{} >= {}, {} refuted ({:.1}%), {} beyond |d| <= {}",
        records.len(),
        confirmed,
        m,
        rank_target,
        refuted,
        fraction * 100.0,
        records.len() as u64 - confirmed - refuted,
        disc_bound
    );
    eprintln!("wrote {} and {}", csv_path, jsonl_path);
    Ok(())
}
