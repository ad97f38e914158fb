//! Curve catalog and admissible specialization enumeration.
//!
//! Substituting a rational x0 = a/b into y² = f(x), d = deg f, lands the
//! point in the quadratic field Q(√t) where t is the squarefree core of the
//! integer b^{d+1}·f(a/b). The enumeration confines x0 to a unit window
//! around ±N/M so the sign of t is pinned, and forces ord_p(x0) = -1 for
//! every prime p of M so that p ramifies in the field.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::arith;
use crate::classgroup;
use crate::forms::{self, Polynomial};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecializeError {
    #[error("unknown catalog curve `{0}`")]
    UnknownCurve(String),
    #[error("bad curve parameters: {0}")]
    BadParameters(&'static str),
    #[error("polynomial must be squarefree")]
    NotSquarefree,
    #[error("polynomial must be monic of odd degree")]
    NotOddMonic,
    #[error("window modulus must be a positive integer")]
    BadModulus,
    #[error("{0} is not prime")]
    BadPrime(u64),
    #[error("bad-prime set could not be derived: {0}")]
    BadPrimeSet(&'static str),
    #[error(transparent)]
    Model(#[from] forms::FormsError),
}

/// Which side of the real line the window sits on, hence the sign of every
/// specialized value: Negative yields imaginary quadratic fields, Positive
/// real ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "pos",
            Sign::Negative => "neg",
        }
    }
}

/// A hyperelliptic curve y² = f(x) in odd monic model, together with the
/// torsion modulus m and the cited lower bound on the m-rank of the
/// rational torsion of its Jacobian. The rank claim is carried as metadata;
/// nothing downstream recomputes it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveSpec {
    pub f: Polynomial,
    pub genus: usize,
    pub m: u64,
    pub claimed_torsion_rank: u32,
    pub provenance: String,
}

impl CurveSpec {
    pub fn new(
        f: Polynomial,
        m: u64,
        claimed_torsion_rank: u32,
        provenance: String,
    ) -> Result<Self, SpecializeError> {
        let d = match f.degree() {
            Some(d) if d % 2 == 1 && f.is_monic() => d,
            _ => return Err(SpecializeError::NotOddMonic),
        };
        if (0..=d).any(|i| !f.coeff(i).is_integer()) {
            return Err(SpecializeError::BadParameters("coefficients must be integers"));
        }
        if !f.is_squarefree() {
            return Err(SpecializeError::NotSquarefree);
        }
        if m < 2 {
            return Err(SpecializeError::BadParameters("torsion modulus must be >= 2"));
        }
        Ok(CurveSpec {
            f,
            genus: (d - 1) / 2,
            m,
            claimed_torsion_rank,
            provenance,
        })
    }

    pub fn degree(&self) -> usize {
        2 * self.genus + 1
    }
}

/// Look up a curve by name. `"family"` takes parameters [m, c] and builds
/// y² = x^{2m} - (1+c²)x^m + c², which factors as (x^m - 1)(x^m - c²) and
/// so has full m-torsion of rank 2 over Q; the returned spec is its odd
/// model at the rational Weierstrass point x = 1. `"lsw-genus4"` is the
/// genus-4 curve y² = t⁹ + 2973t⁶ - 369249t³ + 11764900 with 3-torsion of
/// rank 3, already odd and monic.
pub fn catalog_curve(name: &str, parameters: &[i64]) -> Result<CurveSpec, SpecializeError> {
    match name {
        "family" => {
            let &[m, c] = parameters else {
                return Err(SpecializeError::BadParameters("family takes [m, c]"));
            };
            if m < 2 {
                return Err(SpecializeError::BadParameters("family needs m > 1"));
            }
            if c == 0 || c == 1 || c == -1 {
                return Err(SpecializeError::BadParameters("family needs c outside {0, 1, -1}"));
            }
            let m = m as usize;
            let c2 = BigRational::from(BigInt::from(c) * BigInt::from(c));
            let mut coeffs = vec![BigRational::zero(); 2 * m + 1];
            coeffs[0] = c2.clone();
            coeffs[m] = -(c2 + BigRational::one());
            coeffs[2 * m] = BigRational::one();
            let pre = Polynomial::new(coeffs);
            let model = forms::odd_model(&pre, &BigRational::one())?;
            CurveSpec::new(
                model.h,
                m as u64,
                2,
                format!("family(m={}, c={})", m, c),
            )
        }
        "lsw-genus4" => {
            let f = Polynomial::from_integers(&[11764900, 0, 0, -369249, 0, 0, 2973, 0, 0, 1]);
            CurveSpec::new(f, 3, 3, "lsw-genus4".to_string())
        }
        other => Err(SpecializeError::UnknownCurve(other.to_string())),
    }
}

/// The primes dividing disc(f), a computable superset of the primes of bad
/// reduction. Suitable as the default ramification set S.
pub fn default_bad_primes(curve: &CurveSpec) -> Result<Vec<u64>, SpecializeError> {
    let disc = curve.f.discriminant();
    debug_assert!(disc.is_integer());
    let fac = arith::factor(&disc.to_integer())
        .map_err(|_| SpecializeError::BadPrimeSet("discriminant vanishes"))?;
    let mut out = Vec::new();
    for (p, _) in fac.factors {
        match p.to_u64() {
            Some(p) => out.push(p),
            None => return Err(SpecializeError::BadPrimeSet("discriminant prime exceeds u64")),
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Minimal positive N coprime to M such that f is strictly positive on the
/// open interval (N/M - 1, N/M + 1) for sign +, or strictly negative on
/// (-N/M - 1, -N/M + 1) for sign -, with the window past every real root
/// of f on that side, so the sign holds on the entire ray beyond it.
/// Verified by Sturm root isolation. Such N exists because f is monic of
/// odd degree.
pub fn choose_shift(
    f: &Polynomial,
    modulus: &BigInt,
    sign: Sign,
) -> Result<BigInt, SpecializeError> {
    if modulus.sign() != num_bigint::Sign::Plus {
        return Err(SpecializeError::BadModulus);
    }
    match f.degree() {
        Some(d) if d % 2 == 1 && f.is_monic() => {}
        _ => return Err(SpecializeError::NotOddMonic),
    }
    if !f.is_squarefree() {
        return Err(SpecializeError::NotSquarefree);
    }
    let one = BigRational::one();
    let mut n = BigInt::one();
    loop {
        if n.gcd(modulus).is_one() {
            let center = match sign {
                Sign::Positive => BigRational::new(n.clone(), modulus.clone()),
                Sign::Negative => BigRational::new(-n.clone(), modulus.clone()),
            };
            // roots on the boundary are outside the open window
            let clear = match sign {
                Sign::Positive => f.count_roots_above(&(&center - &one)) == 0,
                Sign::Negative => f.count_roots_below(&(&center + &one)) == 0,
            };
            if clear {
                let v = f.eval(&center);
                let ok = match sign {
                    Sign::Positive => v.is_positive(),
                    Sign::Negative => v.is_negative(),
                };
                debug_assert!(ok, "sign is pinned beyond the extreme root");
                if ok {
                    return Ok(n);
                }
            }
        }
        n += 1;
    }
}

/// One admissible specialization: the point x0 = a/b, the integer
/// b^{d+1}·f(a/b) it evaluates to, the squarefree core t of that integer,
/// and the fundamental discriminant of Q(√t). `predicted_rank` is the
/// m-rank the class group is expected to have; verification fills
/// `verified_rank` and flips the status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecializationRecord {
    pub x0: BigRational,
    pub raw_value: BigInt,
    pub t: BigInt,
    pub d_field: BigInt,
    pub predicted_rank: u32,
    pub verified_rank: Option<u32>,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Pending,
    Verified,
    Refuted,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Pending => "pending",
            RecordStatus::Verified => "verified",
            RecordStatus::Refuted => "refuted",
        }
    }
}

impl SpecializationRecord {
    /// Height of the specialization point, max(|a|, |b|) in lowest terms.
    pub fn height(&self) -> BigInt {
        let a = self.x0.numer().abs();
        let b = self.x0.denom().abs();
        a.max(b)
    }
}

/// The outcome of an enumeration run: records sorted by (height, t), the
/// window parameters that generated them, and counters for candidates that
/// were dropped. `forced` is false for S = ∅ runs, where no ramification is
/// imposed and predicted_rank is carried as metadata only.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub records: Vec<SpecializationRecord>,
    pub duplicates: u64,
    pub degenerate: u64,
    pub shift: BigInt,
    pub modulus: BigInt,
    pub forced: bool,
}

impl Enumeration {
    /// Every emitted height is at most this constant times the s-bound.
    pub fn height_constant(&self) -> BigInt {
        &self.shift + &self.modulus
    }
}

/// Enumerate specializations x0 = ±N/M + (r/s)·M over coprime pairs (r, s)
/// with |r|·M < s ≤ B and gcd(s, M) = 1, where M is the product of the
/// primes in S and N = choose_shift(f, M, sign). The two side conditions
/// hold by construction: |x0 ∓ N/M| < 1, and ord_p(x0) = -1 for each p | M,
/// so ord_p(f(x0)) = -d is odd and p divides the field discriminant.
/// Records are deduplicated by t and sorted by (height, t).
pub fn enumerate_specializations(
    curve: &CurveSpec,
    s_primes: &[u64],
    sign: Sign,
    height_bound: u64,
) -> Result<Enumeration, SpecializeError> {
    if height_bound == 0 {
        return Err(SpecializeError::BadParameters("height bound must be >= 1"));
    }
    let mut primes: Vec<u64> = s_primes.to_vec();
    primes.sort_unstable();
    primes.dedup();
    for &p in &primes {
        if !arith::is_prime_u64(p) {
            return Err(SpecializeError::BadPrime(p));
        }
    }
    let modulus: BigInt = primes.iter().fold(BigInt::one(), |acc, &p| acc * p);
    let shift = choose_shift(&curve.f, &modulus, sign)?;
    let base = match sign {
        Sign::Positive => BigRational::new(shift.clone(), modulus.clone()),
        Sign::Negative => BigRational::new(-shift.clone(), modulus.clone()),
    };
    let d = curve.degree();
    let predicted_rank = match sign {
        Sign::Negative => curve.claimed_torsion_rank,
        Sign::Positive => curve.claimed_torsion_rank.saturating_sub(1),
    };
    let height_cap = (&shift + &modulus) * BigInt::from(height_bound);

    let mut seen: HashSet<BigInt> = HashSet::new();
    let mut records = Vec::new();
    let mut duplicates = 0u64;
    let mut degenerate = 0u64;
    for s in 1..=height_bound {
        let s_big = BigInt::from(s);
        if !s_big.gcd(&modulus).is_one() {
            continue;
        }
        let rmax = ((&s_big - BigInt::one()) / &modulus)
            .to_i64()
            .expect("r bound fits i64");
        for r in -rmax..=rmax {
            if !BigInt::from(r).gcd(&s_big).is_one() {
                continue;
            }
            let x0 = &base + BigRational::new(BigInt::from(r) * &modulus, s_big.clone());
            let b = x0.denom().clone();
            let raw_rat = curve.f.eval(&x0) * BigRational::from(b.pow((d + 1) as u32));
            debug_assert!(raw_rat.is_integer());
            let raw = raw_rat.to_integer();
            if raw.is_zero() {
                degenerate += 1;
                continue;
            }
            let t = arith::kfree_part(&raw, 2).expect("nonzero value").t;
            debug_assert_eq!(
                t.is_negative(),
                sign == Sign::Negative,
                "window sign must pin the value sign"
            );
            if t.is_one() {
                // perfect-square value, Q(√t) is not a quadratic field
                degenerate += 1;
                continue;
            }
            if !seen.insert(t.clone()) {
                duplicates += 1;
                continue;
            }
            let d_field = classgroup::fundamental_discriminant(&t)
                .expect("squarefree t other than 0, 1");
            debug_assert!(primes.iter().all(|&p| (&d_field % p).is_zero()));
            let rec = SpecializationRecord {
                x0,
                raw_value: raw,
                t,
                d_field,
                predicted_rank,
                verified_rank: None,
                status: RecordStatus::Pending,
            };
            debug_assert!(rec.height() <= height_cap);
            records.push(rec);
        }
    }
    records.sort_by(|a, b| (a.height(), &a.t).cmp(&(b.height(), &b.t)));
    Ok(Enumeration {
        records,
        duplicates,
        degenerate,
        shift,
        modulus,
        forced: !primes.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn catalog_family_odd_models() {
        let c = catalog_curve("family", &[2, 2]).unwrap();
        assert_eq!(c.f, Polynomial::from_integers(&[36, -24, 1, 1]));
        assert_eq!(c.genus, 1);
        assert_eq!(c.m, 2);
        assert_eq!(c.claimed_torsion_rank, 2);

        let c = catalog_curve("family", &[3, 2]).unwrap();
        assert_eq!(c.f, Polynomial::from_integers(&[6561, -4374, 1215, -135, 0, 1]));
        assert_eq!(c.genus, 2);
        assert_eq!(c.m, 3);
    }

    #[test]
    fn catalog_lsw_genus4() {
        let c = catalog_curve("lsw-genus4", &[]).unwrap();
        assert_eq!(c.degree(), 9);
        assert_eq!(c.genus, 4);
        assert_eq!(c.m, 3);
        assert_eq!(c.claimed_torsion_rank, 3);
        assert_eq!(c.f.eval(&rat(1, 1)), BigRational::from_i64(11398625).unwrap());
    }

    #[test]
    fn catalog_rejects_bad_input() {
        for c in [0i64, 1, -1] {
            assert!(matches!(
                catalog_curve("family", &[2, c]),
                Err(SpecializeError::BadParameters(_))
            ));
        }
        assert!(matches!(
            catalog_curve("family", &[1, 2]),
            Err(SpecializeError::BadParameters(_))
        ));
        assert!(matches!(
            catalog_curve("family", &[2]),
            Err(SpecializeError::BadParameters(_))
        ));
        assert!(matches!(
            catalog_curve("elliptic", &[]),
            Err(SpecializeError::UnknownCurve(_))
        ));
        // rational coefficients are rejected even when the model is otherwise fine
        let half = Polynomial::new(vec![
            BigRational::new(BigInt::one(), BigInt::from(2)),
            BigRational::one(),
            BigRational::zero(),
            BigRational::one(),
        ]);
        assert!(matches!(
            CurveSpec::new(half, 1, 2, "test".to_string()),
            Err(SpecializeError::BadParameters(_))
        ));
    }

    #[test]
    fn default_bad_primes_of_family_curve() {
        // disc(w³ + w² - 24w + 36) = 5184 = 2^6 · 3^4
        let c = catalog_curve("family", &[2, 2]).unwrap();
        assert_eq!(default_bad_primes(&c).unwrap(), vec![2, 3]);
    }

    #[test]
    fn shift_frozen_values() {
        let f = Polynomial::from_integers(&[36, -24, 1, 1]);
        let m = BigInt::from(6);
        assert_eq!(choose_shift(&f, &m, Sign::Positive).unwrap(), BigInt::from(25));
        assert_eq!(choose_shift(&f, &m, Sign::Negative).unwrap(), BigInt::from(43));
    }

    #[test]
    fn shift_clears_every_root_on_its_side() {
        // roots of f are {-6, 2, 3}; a boundary root is outside the open
        // window, so (3, 5) and (-8, -6) are the first admissible windows
        let f = Polynomial::from_integers(&[36, -24, 1, 1]);
        let n = choose_shift(&f, &BigInt::one(), Sign::Positive).unwrap();
        assert_eq!(n, BigInt::from(4));
        let n = choose_shift(&f, &BigInt::one(), Sign::Negative).unwrap();
        assert_eq!(n, BigInt::from(7));
    }

    #[test]
    fn shift_rejects_bad_input() {
        let cube = Polynomial::from_integers(&[0, 0, 0, 1]);
        assert_eq!(
            choose_shift(&cube, &BigInt::from(6), Sign::Positive),
            Err(SpecializeError::NotSquarefree)
        );
        let even = Polynomial::from_integers(&[1, 0, 1]);
        assert_eq!(
            choose_shift(&even, &BigInt::one(), Sign::Positive),
            Err(SpecializeError::NotOddMonic)
        );
        let f = Polynomial::from_integers(&[36, -24, 1, 1]);
        assert_eq!(
            choose_shift(&f, &BigInt::zero(), Sign::Positive),
            Err(SpecializeError::BadModulus)
        );
    }

    #[test]
    fn lsw_base_specialization() {
        let c = catalog_curve("lsw-genus4", &[]).unwrap();
        let out = enumerate_specializations(&c, &[], Sign::Positive, 1).unwrap();
        assert!(!out.forced);
        assert_eq!(out.shift, BigInt::one());
        assert_eq!(out.records.len(), 1);
        let rec = &out.records[0];
        assert_eq!(rec.x0, BigRational::one());
        assert_eq!(rec.raw_value, BigInt::from(11398625));
        assert_eq!(rec.t, BigInt::from(9305));
        assert_eq!(rec.d_field, BigInt::from(9305));
        assert_eq!(rec.predicted_rank, 2);
        assert_eq!(rec.status, RecordStatus::Pending);
    }

    #[test]
    fn family_ramified_base_specialization() {
        let c = catalog_curve("family", &[2, 2]).unwrap();
        let out = enumerate_specializations(&c, &[2, 3], Sign::Negative, 1).unwrap();
        assert!(out.forced);
        assert_eq!(out.shift, BigInt::from(43));
        assert_eq!(out.modulus, BigInt::from(6));
        assert_eq!(out.records.len(), 1);
        let rec = &out.records[0];
        assert_eq!(rec.x0, rat(-43, 6));
        assert_eq!(rec.raw_value, BigInt::from(-140910));
        assert_eq!(rec.t, BigInt::from(-140910));
        assert_eq!(rec.d_field, BigInt::from(-563640));
        assert_eq!(rec.predicted_rank, 2);
    }

    #[test]
    fn enumeration_invariants_hold() {
        let c = catalog_curve("family", &[2, 2]).unwrap();
        let bound = 40u64;
        let out = enumerate_specializations(&c, &[2, 3], Sign::Negative, bound).unwrap();
        assert_eq!(out.records.len(), 71);
        assert_eq!(out.duplicates, 0);
        let cap = out.height_constant() * BigInt::from(bound);
        let mut seen = HashSet::new();
        let mut last_key: Option<(BigInt, BigInt)> = None;
        for rec in &out.records {
            assert!(rec.t.is_negative());
            assert!(rec.raw_value.is_negative());
            assert!((&rec.d_field % 2u32).is_zero() && (&rec.d_field % 3u32).is_zero());
            assert!(rec.height() <= cap);
            assert!(seen.insert(rec.t.clone()), "t values must be distinct");
            let key = (rec.height(), rec.t.clone());
            if let Some(prev) = last_key {
                assert!(prev <= key, "records must be sorted by (height, t)");
            }
            last_key = Some(key);
            // raw_value = t · z² with z ≥ 1
            let z2 = &rec.raw_value / &rec.t;
            assert!(z2.is_positive());
            assert_eq!(&rec.raw_value % &rec.t, BigInt::zero());
        }
    }

    #[test]
    fn discriminant_growth_bound() {
        let c = catalog_curve("family", &[2, 2]).unwrap();
        let bound = 30u64;
        let out = enumerate_specializations(&c, &[2, 3], Sign::Positive, bound).unwrap();
        // |d_field| ≤ 4·|raw| ≤ 4·(d+1)·max|coeff|·(cB)^{d+1} with c = N + M
        let d = c.degree();
        let (_, ints) = c.f.primitive_integer_parts();
        let maxc = ints.iter().map(|z| z.abs()).max().unwrap();
        let cb = out.height_constant() * BigInt::from(bound);
        let cap = BigInt::from(4 * (d as u64 + 1)) * maxc * cb.pow((d + 1) as u32);
        for rec in &out.records {
            assert!(rec.d_field.abs() <= cap);
            assert!(rec.t.is_positive());
            assert_eq!(rec.predicted_rank, 1);
        }
    }

    #[test]
    fn duplicate_t_suppressed() {
        // with S = ∅ the window (0, 2) is dense in collisions of the
        // squarefree core; first occurrence wins, later ones only count
        let c = catalog_curve("family", &[2, 2]).unwrap();
        let out = enumerate_specializations(&c, &[], Sign::Positive, 60).unwrap();
        assert_eq!(out.records.len(), 2134);
        assert_eq!(out.duplicates, 69);
        assert_eq!(out.degenerate, 0);
        let mut seen = HashSet::new();
        for rec in &out.records {
            assert!(seen.insert(rec.t.clone()));
        }
    }

    #[test]
    fn enumeration_rejects_bad_primes() {
        let c = catalog_curve("family", &[2, 2]).unwrap();
        assert!(matches!(
            enumerate_specializations(&c, &[4], Sign::Negative, 5),
            Err(SpecializeError::BadPrime(4))
        ));
        assert!(matches!(
            enumerate_specializations(&c, &[2], Sign::Negative, 0),
            Err(SpecializeError::BadParameters(_))
        ));
    }
}
