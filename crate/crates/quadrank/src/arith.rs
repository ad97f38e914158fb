//! Exact integer factorization and k-free decomposition.
//!
//! Backend: trial division over a fixed sieve, then Brent's rho with
//! deterministic seeds derived from the input, so `factor` is a pure
//! function. Every reported prime passes a Miller-Rabin certificate that is
//! deterministic for inputs below 3.3e24; the performance contract is inputs
//! up to ~1e15 (larger values still factor, just slower).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArithError {
    #[error("cannot factor zero")]
    Zero,
    #[error("k-free decomposition requires k >= 2, got {0}")]
    BadExponent(u32),
}

/// Sign and prime-power decomposition; primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factorization {
    /// +1 or -1.
    pub sign: i8,
    pub factors: Vec<(BigUint, u32)>,
}

impl Factorization {
    /// Reassemble sign * prod p^e.
    pub fn value(&self) -> BigInt {
        let mut acc = BigUint::one();
        for (p, e) in &self.factors {
            acc *= p.pow(*e);
        }
        let v = BigInt::from(acc);
        if self.sign < 0 {
            -v
        } else {
            v
        }
    }

    /// Number of distinct prime factors.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|(_, e)| *e == 1)
    }
}

/// n = t * z^k with t k-free and z > 0; t carries the sign of n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KFreeDecomposition {
    pub t: BigInt,
    pub z: BigInt,
    pub k: u32,
}

const SIEVE_BOUND: usize = 1 << 16;

/// Primes below 2^16 in ascending order, sieved once.
pub fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut is_comp = vec![false; SIEVE_BOUND];
        let mut primes = Vec::new();
        for n in 2..SIEVE_BOUND {
            if !is_comp[n] {
                primes.push(n as u32);
                let mut m = n * n;
                while m < SIEVE_BOUND {
                    is_comp[m] = true;
                    m += n;
                }
            }
        }
        primes
    })
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn mulmod64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod64(acc, base, m);
        }
        base = mulmod64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for the full u64 range.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    'base: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod64(x, x, n);
            if x == n - 1 {
                continue 'base;
            }
        }
        return false;
    }
    true
}

fn addmod128(a: u128, b: u128, m: u128) -> u128 {
    // requires a, b < m < 2^127
    if a >= m - b {
        a - (m - b)
    } else {
        a + b
    }
}

fn mulmod128(mut a: u128, mut b: u128, m: u128) -> u128 {
    let mut r = 0u128;
    a %= m;
    while b > 0 {
        if b & 1 == 1 {
            r = addmod128(r, a, m);
        }
        a = addmod128(a, a, m);
        b >>= 1;
    }
    r
}

fn powmod128(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod128(acc, base, m);
        }
        base = mulmod128(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Miller-Rabin on u128. The 13-prime base set is a certificate below
/// 3.3e24; above that it is a fixed 40-base test (far out of contract).
fn is_prime_u128(n: u128) -> bool {
    if n <= u64::MAX as u128 {
        return is_prime_u64(n as u64);
    }
    debug_assert!(n < 1 << 127);
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    let deterministic_cutoff = 3_317_044_064_679_887_385_961_981u128;
    let bases: &[u128] = if n < deterministic_cutoff {
        &[2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41]
    } else {
        &[
            2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79,
            83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
        ]
    };
    'base: for &a in bases {
        let mut x = powmod128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod128(x, x, n);
            if x == n - 1 {
                continue 'base;
            }
        }
        return false;
    }
    true
}

/// Primality of an arbitrary magnitude; exact for values below 3.3e24.
pub fn is_prime(n: &BigUint) -> bool {
    if let Some(x) = n.to_u128() {
        return is_prime_u128(x);
    }
    // Out-of-contract sizes: fixed-base Miller-Rabin.
    if n.is_even() {
        return false;
    }
    let one = BigUint::one();
    let nm1 = n - &one;
    let s = nm1.trailing_zeros().unwrap_or(0);
    let d = &nm1 >> s;
    'base: for a in [
        2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83,
        89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
    ] {
        let a = BigUint::from(a);
        let mut x = a.modpow(&d, n);
        if x == one || x == nm1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == nm1 {
                continue 'base;
            }
        }
        return false;
    }
    true
}

/// Brent's cycle-finding rho on u64. Returns a nontrivial factor of
/// composite n. Deterministic: parameters derive from n and the attempt
/// counter.
fn brent_rho_u64(n: u64) -> u64 {
    debug_assert!(n > 3 && !is_prime_u64(n));
    if n & 1 == 0 {
        return 2;
    }
    let mut seed = n ^ 0xd1b54a32d192ed03;
    loop {
        let c = 1 + splitmix64(&mut seed) % (n - 1);
        let mut y = 2 + splitmix64(&mut seed) % (n - 2);
        let m = 128u64;
        let (mut r, mut q, mut g) = (1u64, 1u64, 1u64);
        let (mut x, mut ys) = (0u64, 0u64);
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = addmod128(mulmod64(y, y, n) as u128, c as u128, n as u128) as u64;
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = addmod128(mulmod64(y, y, n) as u128, c as u128, n as u128) as u64;
                    q = mulmod64(q, x.abs_diff(y), n);
                }
                g = gcd_u64(q, n);
                k += m;
            }
            r <<= 1;
        }
        if g == n {
            // backtrack
            g = 1;
            while g == 1 {
                ys = addmod128(mulmod64(ys, ys, n) as u128, c as u128, n as u128) as u64;
                g = gcd_u64(x.abs_diff(ys), n);
            }
        }
        if g != n {
            return g;
        }
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn gcd_u128(a: u128, b: u128) -> u128 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn brent_rho_u128(n: u128) -> u128 {
    debug_assert!(!is_prime_u128(n));
    if n & 1 == 0 {
        return 2;
    }
    let mut seed = (n as u64) ^ ((n >> 64) as u64) ^ 0x9e3779b97f4a7c15;
    loop {
        let c = 1 + splitmix64(&mut seed) as u128 % (n - 1);
        let mut y = 2 + splitmix64(&mut seed) as u128 % (n - 2);
        let m = 64u64;
        let (mut r, mut q, mut g) = (1u64, 1u128, 1u128);
        let (mut x, mut ys) = (0u128, 0u128);
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = addmod128(mulmod128(y, y, n), c, n);
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = addmod128(mulmod128(y, y, n), c, n);
                    q = mulmod128(q, x.abs_diff(y), n);
                }
                g = gcd_u128(q, n);
                k += m;
            }
            r <<= 1;
        }
        if g == n {
            g = 1;
            while g == 1 {
                ys = addmod128(mulmod128(ys, ys, n), c, n);
                g = gcd_u128(x.abs_diff(ys), n);
            }
        }
        if g != n {
            return g;
        }
    }
}

fn brent_rho_big(n: &BigUint) -> BigUint {
    debug_assert!(!is_prime(n));
    if n.is_even() {
        return BigUint::from(2u32);
    }
    let mut seed = n.iter_u64_digits().fold(0u64, |a, d| a ^ d) ^ 0x2545f4914f6cdd1d;
    let one = BigUint::one();
    loop {
        let c = BigUint::from(1 + splitmix64(&mut seed) % 1024);
        let mut y = BigUint::from(2 + splitmix64(&mut seed) % 1024);
        let m = 64u64;
        let (mut r, mut g) = (1u64, BigUint::one());
        let mut q = BigUint::one();
        let mut x = BigUint::zero();
        let mut ys = BigUint::zero();
        while g == one {
            x = y.clone();
            for _ in 0..r {
                y = (&y * &y + &c) % n;
            }
            let mut k = 0u64;
            while k < r && g == one {
                ys = y.clone();
                for _ in 0..m.min(r - k) {
                    y = (&y * &y + &c) % n;
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = (&q * diff) % n;
                }
                g = q.gcd(n);
                k += m;
            }
            r <<= 1;
        }
        if &g == n {
            g = BigUint::one();
            while g == one {
                ys = (&ys * &ys + &c) % n;
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
            }
        }
        if &g != n {
            return g;
        }
    }
}

fn factor_u64_into(n: u64, out: &mut HashMap<u64, u32>) {
    let mut stack = vec![n];
    while let Some(x) = stack.pop() {
        if x == 1 {
            continue;
        }
        if is_prime_u64(x) {
            *out.entry(x).or_insert(0) += 1;
        } else {
            let d = brent_rho_u64(x);
            stack.push(d);
            stack.push(x / d);
        }
    }
}

/// Factor a nonzero integer into sign and prime powers.
pub fn factor(n: &BigInt) -> Result<Factorization, ArithError> {
    if n.is_zero() {
        return Err(ArithError::Zero);
    }
    let sign = if n.sign() == Sign::Minus { -1i8 } else { 1 };
    let mut rem = n.magnitude().clone();
    let mut small: HashMap<u64, u32> = HashMap::new();
    for &p in small_primes() {
        let p_big = BigUint::from(p);
        if (&p_big * &p_big) > rem {
            break;
        }
        while (&rem % &p_big).is_zero() {
            *small.entry(p as u64).or_insert(0) += 1;
            rem /= &p_big;
        }
        if rem.is_one() {
            break;
        }
    }
    let mut big: Vec<(BigUint, u32)> = Vec::new();
    if !rem.is_one() {
        if let Some(x) = rem.to_u64() {
            factor_u64_into(x, &mut small);
        } else if let Some(x) = rem.to_u128() {
            let mut stack = vec![x];
            while let Some(v) = stack.pop() {
                if v == 1 {
                    continue;
                }
                if let Some(v64) = u64::try_from(v).ok() {
                    factor_u64_into(v64, &mut small);
                } else if is_prime_u128(v) {
                    merge_big(&mut big, BigUint::from(v), 1);
                } else {
                    let d = brent_rho_u128(v);
                    stack.push(d);
                    stack.push(v / d);
                }
            }
        } else {
            let mut stack = vec![rem];
            while let Some(v) = stack.pop() {
                if v.is_one() {
                    continue;
                }
                if let Some(v128) = v.to_u128() {
                    if let Ok(v64) = u64::try_from(v128) {
                        factor_u64_into(v64, &mut small);
                        continue;
                    }
                    if is_prime_u128(v128) {
                        merge_big(&mut big, v, 1);
                    } else {
                        let d = brent_rho_u128(v128);
                        stack.push(BigUint::from(d));
                        stack.push(BigUint::from(v128 / d));
                    }
                    continue;
                }
                if is_prime(&v) {
                    merge_big(&mut big, v, 1);
                } else {
                    let d = brent_rho_big(&v);
                    let q = &v / &d;
                    stack.push(d);
                    stack.push(q);
                }
            }
        }
    }
    let mut factors: Vec<(BigUint, u32)> = small
        .into_iter()
        .map(|(p, e)| (BigUint::from(p), e))
        .collect();
    factors.extend(big);
    factors.sort_by(|a, b| a.0.cmp(&b.0));
    // identical primes can arrive from both the u128 split and the big path
    let mut merged: Vec<(BigUint, u32)> = Vec::with_capacity(factors.len());
    for (p, e) in factors {
        if let Some(last) = merged.last_mut() {
            if last.0 == p {
                last.1 += e;
                continue;
            }
        }
        merged.push((p, e));
    }
    Ok(Factorization {
        sign,
        factors: merged,
    })
}

fn merge_big(big: &mut Vec<(BigUint, u32)>, p: BigUint, e: u32) {
    for (q, f) in big.iter_mut() {
        if *q == p {
            *f += e;
            return;
        }
    }
    big.push((p, e));
}

/// n = t * z^k with t k-free, z > 0, sign(t) = sign(n).
pub fn kfree_part(n: &BigInt, k: u32) -> Result<KFreeDecomposition, ArithError> {
    if k < 2 {
        return Err(ArithError::BadExponent(k));
    }
    let f = factor(n)?;
    let mut t = BigUint::one();
    let mut z = BigUint::one();
    for (p, e) in &f.factors {
        let (q, r) = (e / k, e % k);
        if r > 0 {
            t *= p.pow(r);
        }
        if q > 0 {
            z *= p.pow(q);
        }
    }
    let t = if f.sign < 0 {
        -BigInt::from(t)
    } else {
        BigInt::from(t)
    };
    Ok(KFreeDecomposition {
        t,
        z: BigInt::from(z),
        k,
    })
}

/// Convenience: squarefree core of n.
pub fn squarefree_core(n: &BigInt) -> Result<BigInt, ArithError> {
    Ok(kfree_part(n, 2)?.t)
}

/// Kronecker symbol (a/n), extending the Jacobi symbol to all n.
pub fn kronecker(mut a: i128, mut n: i128) -> i32 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    if a % 2 == 0 && n % 2 == 0 {
        return 0;
    }
    // (2/m) for odd m depends on m mod 8.
    fn two_sym(m: i128) -> i32 {
        match (m & 7).unsigned_abs() as u8 {
            1 | 7 => 1,
            _ => -1,
        }
    }
    let mut k = 1i32;
    let mut v = 0u32;
    while n % 2 == 0 {
        n /= 2;
        v += 1;
    }
    if v % 2 == 1 {
        k = two_sym(a);
    }
    if n < 0 {
        n = -n;
        if a < 0 {
            k = -k;
        }
    }
    // n odd positive from here; standard quadratic reciprocity loop.
    loop {
        a = a.rem_euclid(n);
        if a == 0 {
            return if n == 1 { k } else { 0 };
        }
        let mut v = 0u32;
        while a % 2 == 0 {
            a /= 2;
            v += 1;
        }
        if v % 2 == 1 {
            k *= two_sym(n);
        }
        if a & n & 2 != 0 {
            k = -k;
        }
        std::mem::swap(&mut a, &mut n);
    }
}

/// Tonelli-Shanks square root mod an odd prime; None for non-residues.
pub fn sqrt_mod_prime(a: u64, p: u64) -> Option<u64> {
    debug_assert!(p > 2 && is_prime_u64(p));
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if powmod64(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(powmod64(a, (p + 1) / 4, p));
    }
    let s = (p - 1).trailing_zeros();
    let q = (p - 1) >> s;
    let z = (2..)
        .find(|&z| powmod64(z, (p - 1) / 2, p) == p - 1)
        .unwrap();
    let mut m = s;
    let mut c = powmod64(z, q, p);
    let mut t = powmod64(a, q, p);
    let mut r = powmod64(a, (q + 1) / 2, p);
    while t != 1 {
        let i = (1..m)
            .scan(t, |tt, i| {
                *tt = mulmod64(*tt, *tt, p);
                Some((i, *tt))
            })
            .find(|&(_, tt)| tt == 1)
            .map(|(i, _)| i)
            .unwrap();
        let b = powmod64(c, 1 << (m - i - 1), p);
        m = i;
        c = mulmod64(b, b, p);
        t = mulmod64(t, c, p);
        r = mulmod64(r, b, p);
    }
    Some(r)
}

/// Shared in-memory factorization cache; the writer is serialized.
#[derive(Default)]
pub struct FactorCache {
    inner: Mutex<HashMap<BigInt, Factorization>>,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: &BigInt) -> Option<Factorization> {
        self.inner.lock().unwrap().get(n).cloned()
    }

    pub fn put(&self, n: BigInt, f: Factorization) {
        self.inner.lock().unwrap().insert(n, f);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot sorted by key; used by the persistence layer.
    pub fn entries(&self) -> Vec<(BigInt, Factorization)> {
        let mut v: Vec<_> = self
            .inner
            .lock()
            .unwrap()
            .iter()
            .map(|(k, f)| (k.clone(), f.clone()))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}

/// Cache-aware factor; falls back to `factor` and records the result.
pub fn factor_cached(cache: &FactorCache, n: &BigInt) -> Result<Factorization, ArithError> {
    if let Some(f) = cache.get(n) {
        return Ok(f);
    }
    let f = factor(n)?;
    cache.put(n.clone(), f.clone());
    Ok(f)
}
