//! Dense univariate polynomials over Q with the exact machinery the rest of
//! the crate leans on: Euclidean division, gcd, Yun's squarefree
//! decomposition, Taylor shifts, resultants, and Sturm root counting.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Coefficients in ascending order (constant term first); no trailing zeros,
/// so the zero polynomial has an empty coefficient vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<BigRational>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![] }
    }

    pub fn constant(c: BigRational) -> Self {
        Self::new(vec![c])
    }

    pub fn from_integers(coeffs: &[i64]) -> Self {
        Self::new(
            coeffs
                .iter()
                .map(|&c| BigRational::from(BigInt::from(c)))
                .collect(),
        )
    }

    pub fn from_bigints(coeffs: &[BigInt]) -> Self {
        Self::new(
            coeffs
                .iter()
                .map(|c| BigRational::from(c.clone()))
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, i: usize) -> BigRational {
        self.coeffs.get(i).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn leading(&self) -> Option<&BigRational> {
        self.coeffs.last()
    }

    pub fn is_monic(&self) -> bool {
        self.leading().map_or(false, |c| c.is_one())
    }

    /// All coefficients integral.
    pub fn integer_coeffs(&self) -> Option<Vec<BigInt>> {
        self.coeffs
            .iter()
            .map(|c| {
                if c.denom().is_one() {
                    Some(c.numer().clone())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.coeff(i) + other.coeff(i));
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.coeff(i) - other.coeff(i));
        }
        Self::new(out)
    }

    pub fn neg(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from(BigInt::from(i)))
                .collect(),
        )
    }

    /// Euclidean division; divisor must be nonzero.
    pub fn divrem(&self, div: &Self) -> (Self, Self) {
        assert!(!div.is_zero(), "division by zero polynomial");
        let dd = div.coeffs.len() - 1;
        if self.coeffs.len() <= dd && !(self.coeffs.len() == dd + 1) {
            if self.coeffs.len() < dd + 1 {
                return (Self::zero(), self.clone());
            }
        }
        let mut rem = self.coeffs.clone();
        if rem.len() < dd + 1 {
            return (Self::zero(), self.clone());
        }
        let lead = div.coeffs[dd].clone();
        let mut quot = vec![BigRational::zero(); rem.len() - dd];
        for i in (dd..rem.len()).rev() {
            if rem[i].is_zero() {
                continue;
            }
            let q = &rem[i] / &lead;
            quot[i - dd] = q.clone();
            for j in 0..=dd {
                let t = &q * &div.coeffs[j];
                rem[i - dd + j] -= t;
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    pub fn rem(&self, div: &Self) -> Self {
        self.divrem(div).1
    }

    /// Exact quotient; panics if division is inexact.
    pub fn div_exact(&self, div: &Self) -> Self {
        let (q, r) = self.divrem(div);
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            None => Self::zero(),
            Some(l) => self.scale(&(BigRational::one() / l)),
        }
    }

    /// Monic gcd over Q.
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn is_squarefree(&self) -> bool {
        match self.degree() {
            None | Some(0) => false,
            Some(_) => self.gcd(&self.derivative()).degree() == Some(0),
        }
    }

    /// f / gcd(f, f'), monic: same distinct roots, multiplicity one.
    pub fn squarefree_part(&self) -> Self {
        let g = self.gcd(&self.derivative());
        if g.degree() == Some(0) {
            return self.monic();
        }
        self.div_exact(&g).monic()
    }

    /// Yun's algorithm: f = lc * prod g_i^i with g_i monic squarefree and
    /// pairwise coprime; returns the (g_i, i) with deg g_i > 0.
    pub fn squarefree_decomposition(&self) -> Vec<(Polynomial, u32)> {
        let n = match self.degree() {
            None | Some(0) => return vec![],
            Some(n) => n,
        };
        let _ = n;
        let f = self.monic();
        let df = f.derivative();
        let a0 = f.gcd(&df);
        let mut b = f.div_exact(&a0);
        let mut c = df.div_exact(&a0);
        let mut d = c.sub(&b.derivative());
        let mut out = Vec::new();
        let mut i = 1u32;
        loop {
            let a = b.gcd(&d);
            if a.degree().map_or(false, |d| d > 0) {
                out.push((a.clone(), i));
            }
            b = b.div_exact(&a);
            if b.degree() == Some(0) {
                break;
            }
            c = d.div_exact(&a);
            d = c.sub(&b.derivative());
            i += 1;
        }
        out
    }

    /// f(x + r).
    pub fn taylor_shift(&self, r: &BigRational) -> Self {
        let mut acc = Self::zero();
        let shift = Self::new(vec![r.clone(), BigRational::one()]);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&shift).add(&Self::constant(c.clone()));
        }
        acc
    }

    /// sum coeff(j) * u^(n-j): the degree-n reversal.
    pub fn reversed(&self, n: usize) -> Self {
        let mut out = vec![BigRational::zero(); n + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            assert!(j <= n, "reversal degree too small");
            out[n - j] = c.clone();
        }
        Self::new(out)
    }

    /// Resultant of self and other over Q.
    pub fn resultant(&self, other: &Self) -> BigRational {
        fn go(f: &Polynomial, g: &Polynomial) -> BigRational {
            if f.is_zero() || g.is_zero() {
                return BigRational::zero();
            }
            let (df, dg) = (f.degree().unwrap(), g.degree().unwrap());
            if dg == 0 {
                return g.coeff(0).pow_usize(df);
            }
            if df < dg {
                let sign = if (df * dg) % 2 == 1 {
                    -BigRational::one()
                } else {
                    BigRational::one()
                };
                return sign * go(g, f);
            }
            let r = f.rem(g);
            if r.is_zero() {
                return BigRational::zero();
            }
            let dr = r.degree().unwrap();
            let sign = if (df * dg) % 2 == 1 {
                -BigRational::one()
            } else {
                BigRational::one()
            };
            sign * g.leading().unwrap().pow_usize(df - dr) * go(g, &r)
        }
        go(self, other)
    }

    /// disc(f) = (-1)^(n(n-1)/2) res(f, f') / lc(f).
    pub fn discriminant(&self) -> BigRational {
        let n = self.degree().expect("discriminant of zero polynomial");
        assert!(n >= 1);
        let res = self.resultant(&self.derivative());
        let sign = if (n * (n - 1) / 2) % 2 == 1 {
            -BigRational::one()
        } else {
            BigRational::one()
        };
        sign * res / self.leading().unwrap()
    }

    /// Write f = (p/q) * fhat with fhat primitive integer, p/q > 0 reduced;
    /// the sign stays in fhat.
    pub fn primitive_integer_parts(&self) -> (BigRational, Vec<BigInt>) {
        if self.is_zero() {
            return (BigRational::one(), vec![]);
        }
        let mut den = BigInt::one();
        for c in &self.coeffs {
            den = den.lcm(c.denom());
        }
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| c.numer() * (&den / c.denom()))
            .collect();
        let mut content = BigInt::zero();
        for c in &ints {
            content = content.gcd(c);
        }
        if content.is_zero() {
            content = BigInt::one();
        }
        let prim: Vec<BigInt> = ints.iter().map(|c| c / &content).collect();
        (BigRational::new(content, den), prim)
    }

    fn sturm_sequence(&self) -> Vec<Polynomial> {
        let mut seq = vec![self.clone(), self.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let r = seq[n - 2].rem(&seq[n - 1]).neg();
            if r.is_zero() {
                break;
            }
            seq.push(r);
        }
        seq
    }

    fn sign_variations_at(seq: &[Polynomial], x: &BigRational) -> usize {
        let mut last = 0i8;
        let mut var = 0;
        for p in seq {
            let v = p.eval(x);
            let s = if v.is_zero() {
                0
            } else if v.is_positive() {
                1
            } else {
                -1
            };
            if s != 0 {
                if last != 0 && s != last {
                    var += 1;
                }
                last = s;
            }
        }
        var
    }

    fn sign_variations_at_infinity(seq: &[Polynomial], positive: bool) -> usize {
        let mut last = 0i8;
        let mut var = 0;
        for p in seq {
            let s = match p.degree() {
                None => 0,
                Some(d) => {
                    let lead = p.leading().unwrap();
                    let base = if lead.is_positive() { 1i8 } else { -1 };
                    if positive || d % 2 == 0 {
                        base
                    } else {
                        -base
                    }
                }
            };
            if s != 0 {
                if last != 0 && s != last {
                    var += 1;
                }
                last = s;
            }
        }
        var
    }

    /// Distinct real roots strictly greater than a.
    pub fn count_roots_above(&self, a: &BigRational) -> usize {
        let sf = self.squarefree_part();
        if sf.degree().map_or(true, |d| d == 0) {
            return 0;
        }
        let seq = sf.sturm_sequence();
        Self::sign_variations_at(&seq, a) - Self::sign_variations_at_infinity(&seq, true)
    }

    /// Distinct real roots strictly less than a.
    pub fn count_roots_below(&self, a: &BigRational) -> usize {
        let sf = self.squarefree_part();
        if sf.degree().map_or(true, |d| d == 0) {
            return 0;
        }
        let seq = sf.sturm_sequence();
        let upto = Self::sign_variations_at_infinity(&seq, false) - Self::sign_variations_at(&seq, a);
        if sf.eval(a).is_zero() {
            upto.saturating_sub(1)
        } else {
            upto
        }
    }

    pub fn count_real_roots(&self) -> usize {
        let sf = self.squarefree_part();
        if sf.degree().map_or(true, |d| d == 0) {
            return 0;
        }
        let seq = sf.sturm_sequence();
        Self::sign_variations_at_infinity(&seq, false)
            - Self::sign_variations_at_infinity(&seq, true)
    }
}

trait PowUsize {
    fn pow_usize(&self, e: usize) -> Self;
}

impl PowUsize for BigRational {
    fn pow_usize(&self, e: usize) -> Self {
        let mut acc = BigRational::one();
        for _ in 0..e {
            acc *= self;
        }
        acc
    }
}
