//! Integer binary forms of a declared degree, and the fractional linear maps
//! used to pull specialization points around.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Homogeneous form of degree `coeffs.len() - 1` in (X, Y); `coeffs[i]` is
/// the coefficient of X^i Y^(d-i). Leading entries may be zero, so the
/// declared degree is part of the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryForm {
    pub coeffs: Vec<BigInt>,
}

impl BinaryForm {
    pub fn new(coeffs: Vec<BigInt>) -> Self {
        assert!(!coeffs.is_empty(), "form needs at least one coefficient");
        BinaryForm { coeffs }
    }

    pub fn from_integers(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Exact value of sum coeffs[i] x^i y^(d-i).
    pub fn evaluate(&self, x: &BigInt, y: &BigInt) -> BigInt {
        let d = self.degree();
        let mut yp = vec![BigInt::one()];
        for _ in 0..d {
            let next = yp.last().unwrap() * y;
            yp.push(next);
        }
        let mut acc = BigInt::zero();
        let mut xp = BigInt::one();
        for (i, c) in self.coeffs.iter().enumerate() {
            acc += c * &xp * &yp[d - i];
            if i < d {
                xp *= x;
            }
        }
        acc
    }

    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in &self.coeffs {
            g = g.gcd(c);
        }
        g
    }

    pub fn primitive(&self) -> Self {
        let ct = self.content();
        if ct.is_zero() || ct.is_one() {
            return self.clone();
        }
        BinaryForm::new(self.coeffs.iter().map(|c| c / &ct).collect())
    }

    /// F(x, 1) as a dense polynomial; leading zero coefficients of the form
    /// trim away.
    pub fn dehomogenize(&self) -> super::poly::Polynomial {
        super::poly::Polynomial::new(
            self.coeffs
                .iter()
                .map(|c| BigRational::from(c.clone()))
                .collect(),
        )
    }

    /// Degree of F(x, 1), i.e. declared degree minus the power of Y dividing
    /// the form's non-Y part.
    pub fn x_degree(&self) -> Option<usize> {
        self.dehomogenize().degree()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree(), other.degree(), "degree mismatch in form sum");
        BinaryForm::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.degree() + other.degree();
        let mut out = vec![BigInt::zero(); d + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        BinaryForm::new(out)
    }

    pub fn scale(&self, s: &BigInt) -> Self {
        BinaryForm::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn pow(&self, e: usize) -> Self {
        let mut acc = BinaryForm::new(vec![BigInt::one()]);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Whether the form is c * L^d for a single linear form L.
    pub fn is_power_of_linear(&self) -> bool {
        let p = self.dehomogenize();
        let d = self.degree();
        match p.degree() {
            None => true,
            Some(0) => true,
            Some(e) if e < d => false,
            Some(_) => {
                let sf = p.squarefree_part();
                if sf.degree() != Some(1) {
                    return false;
                }
                let mut acc = super::poly::Polynomial::constant(BigRational::one());
                for _ in 0..d {
                    acc = acc.mul(&sf);
                }
                acc.scale(p.leading().unwrap()) == p
            }
        }
    }
}

/// x -> (a x + b) / (c x + d) with integer entries and nonzero determinant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobiusMap {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl MobiusMap {
    pub fn new(a: BigInt, b: BigInt, c: BigInt, d: BigInt) -> Option<Self> {
        let m = MobiusMap { a, b, c, d };
        if m.det().is_zero() {
            None
        } else {
            Some(m)
        }
    }

    pub fn from_integers(a: i64, b: i64, c: i64, d: i64) -> Option<Self> {
        Self::new(
            BigInt::from(a),
            BigInt::from(b),
            BigInt::from(c),
            BigInt::from(d),
        )
    }

    pub fn identity() -> Self {
        MobiusMap {
            a: BigInt::one(),
            b: BigInt::zero(),
            c: BigInt::zero(),
            d: BigInt::one(),
        }
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    /// None at the pole.
    pub fn apply(&self, x: &BigRational) -> Option<BigRational> {
        let num = BigRational::from(self.a.clone()) * x + BigRational::from(self.b.clone());
        let den = BigRational::from(self.c.clone()) * x + BigRational::from(self.d.clone());
        if den.is_zero() {
            None
        } else {
            Some(num / den)
        }
    }

    /// Image of a projective point (x : y); always defined.
    pub fn apply_projective(&self, x: &BigInt, y: &BigInt) -> (BigInt, BigInt) {
        (&self.a * x + &self.b * y, &self.c * x + &self.d * y)
    }

    pub fn inverse(&self) -> Self {
        MobiusMap {
            a: self.d.clone(),
            b: -self.b.clone(),
            c: -self.c.clone(),
            d: self.a.clone(),
        }
    }

    pub fn compose(&self, inner: &Self) -> Self {
        MobiusMap {
            a: &self.a * &inner.a + &self.b * &inner.c,
            b: &self.a * &inner.b + &self.b * &inner.d,
            c: &self.c * &inner.a + &self.d * &inner.c,
            d: &self.c * &inner.b + &self.d * &inner.d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horner_in_y(f: &BinaryForm, x: &BigInt, y: &BigInt) -> BigInt {
        // coefficient of y^j is coeffs[d-j] x^(d-j); fold from high j down
        let d = f.degree();
        let mut acc = BigInt::zero();
        let mut xp = vec![BigInt::one()];
        for _ in 0..d {
            let next = xp.last().unwrap() * x;
            xp.push(next);
        }
        for j in (0..=d).rev() {
            acc = acc * y + &f.coeffs[d - j] * &xp[d - j];
        }
        acc
    }

    #[test]
    fn evaluation_frozen_values() {
        // X^3 Y + Y^4
        let f = BinaryForm::from_integers(&[1, 0, 0, 1, 0]);
        assert_eq!(f.degree(), 4);
        let ev = |x: i64, y: i64| f.evaluate(&BigInt::from(x), &BigInt::from(y));
        assert_eq!(ev(1, 1), BigInt::from(2));
        assert_eq!(ev(2, 1), BigInt::from(9));
        assert_eq!(ev(2, 2), BigInt::from(32));
    }

    #[test]
    fn evaluation_agrees_with_second_order() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..10_000 {
            let deg = (next() % 6 + 1) as usize;
            let coeffs: Vec<i64> = (0..=deg).map(|_| (next() % 41) as i64 - 20).collect();
            let f = BinaryForm::from_integers(&coeffs);
            let x = BigInt::from((next() % 201) as i64 - 100);
            let y = BigInt::from((next() % 201) as i64 - 100);
            assert_eq!(f.evaluate(&x, &y), horner_in_y(&f, &x, &y));
        }
    }

    #[test]
    fn content_and_primitive() {
        let f = BinaryForm::from_integers(&[6, -4, 10]);
        assert_eq!(f.content(), BigInt::from(2));
        assert_eq!(f.primitive(), BinaryForm::from_integers(&[3, -2, 5]));
    }

    #[test]
    fn declared_degree_survives_zero_leads() {
        // Y^4 as a degree-4 form: the X-degree is 0
        let f = BinaryForm::from_integers(&[1, 0, 0, 0, 0]);
        assert_eq!(f.degree(), 4);
        assert_eq!(f.x_degree(), Some(0));
        assert_eq!(
            f.evaluate(&BigInt::from(5), &BigInt::from(2)),
            BigInt::from(16)
        );
    }

    #[test]
    fn power_of_linear_detection() {
        // (X + 2Y)^3 = X^3 + 6X^2 Y + 12X Y^2 + 8Y^3: ascending in X
        let f = BinaryForm::from_integers(&[8, 12, 6, 1]);
        assert!(f.is_power_of_linear());
        let g = BinaryForm::from_integers(&[7, 0, 0, 0]); // 7Y^3
        assert!(g.is_power_of_linear());
        let h = BinaryForm::from_integers(&[1, 0, 0, 1]); // X^3 + Y^3
        assert!(!h.is_power_of_linear());
        let k = BinaryForm::from_integers(&[0, 0, 1, 0]); // X^2 Y
        assert!(!k.is_power_of_linear());
        let l = BinaryForm::from_integers(&[0, 0, 0, 5]); // 5X^3
        assert!(l.is_power_of_linear());
    }

    #[test]
    fn mobius_round_trip() {
        let m = MobiusMap::from_integers(1, -1, 25, 26).unwrap();
        let inv = m.inverse();
        let x = BigRational::new(BigInt::from(3), BigInt::from(7));
        let y = m.apply(&x).unwrap();
        assert_eq!(inv.apply(&y).unwrap(), x);
        assert!(MobiusMap::from_integers(2, 4, 1, 2).is_none());
        let id = m.compose(&inv);
        // composition with inverse is det * identity
        assert_eq!(id.b, BigInt::zero());
        assert_eq!(id.c, BigInt::zero());
        assert_eq!(id.a, id.d);
    }

    #[test]
    fn projective_matches_affine() {
        let m = MobiusMap::from_integers(3, 1, 2, 5).unwrap();
        let (u, v) = m.apply_projective(&BigInt::from(4), &BigInt::from(9));
        let x = BigRational::new(BigInt::from(4), BigInt::from(9));
        assert_eq!(m.apply(&x).unwrap(), BigRational::new(u, v));
    }
}
