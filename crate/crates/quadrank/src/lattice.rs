//! Rank-2 integer lattices under the max-norm: minimal bases by exhaustive
//! search over a reduced coefficient box, and the positivization step that
//! rewrites a minimal basis with all entries nonnegative at the cost of a
//! factor 3 in the norm bound.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Vec2 = (BigInt, BigInt);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("generators are linearly dependent")]
    Degenerate,
    #[error("both basis vectors mix signs; not a minimal basis")]
    NotMinimal,
}

/// Full-rank sublattice of Z² spanned by two generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice2 {
    pub g0: Vec2,
    pub g1: Vec2,
}

impl Lattice2 {
    pub fn from_integers(g0: (i64, i64), g1: (i64, i64)) -> Self {
        Lattice2 {
            g0: (BigInt::from(g0.0), BigInt::from(g0.1)),
            g1: (BigInt::from(g1.0), BigInt::from(g1.1)),
        }
    }

    pub fn det(&self) -> BigInt {
        det2(&self.g0, &self.g1)
    }

    pub fn contains(&self, v: &Vec2) -> bool {
        // v = a g0 + c g1 has integer a, c exactly when both cross
        // determinants divide
        let d = self.det();
        if d.is_zero() {
            return false;
        }
        det2(v, &self.g1).mod_floor(&d).is_zero() && det2(&self.g0, v).mod_floor(&d).is_zero()
    }
}

/// Ordered basis of a rank-2 lattice with its max-norm bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis2 {
    pub v0: Vec2,
    pub v1: Vec2,
    pub bound: BigInt,
}

impl Basis2 {
    pub fn new(v0: Vec2, v1: Vec2) -> Self {
        let bound = norm_inf(&v0).max(norm_inf(&v1));
        Basis2 { v0, v1, bound }
    }

    pub fn from_integers(v0: (i64, i64), v1: (i64, i64)) -> Self {
        Self::new(
            (BigInt::from(v0.0), BigInt::from(v0.1)),
            (BigInt::from(v1.0), BigInt::from(v1.1)),
        )
    }

    pub fn det(&self) -> BigInt {
        det2(&self.v0, &self.v1)
    }
}

fn det2(a: &Vec2, b: &Vec2) -> BigInt {
    &a.0 * &b.1 - &a.1 * &b.0
}

fn dot(a: &Vec2, b: &Vec2) -> BigInt {
    &a.0 * &b.0 + &a.1 * &b.1
}

fn norm_sq(v: &Vec2) -> BigInt {
    dot(v, v)
}

fn norm_inf(v: &Vec2) -> BigInt {
    v.0.abs().max(v.1.abs())
}

fn sub(a: &Vec2, b: &Vec2) -> Vec2 {
    (&a.0 - &b.0, &a.1 - &b.1)
}

fn scaled(v: &Vec2, s: &BigInt) -> Vec2 {
    (&v.0 * s, &v.1 * s)
}

fn neg(v: &Vec2) -> Vec2 {
    (-v.0.clone(), -v.1.clone())
}

/// Deterministic order among equal-norm candidates: smaller |s|, then
/// smaller |r|, then larger r, then larger s. Matches the choice the search
/// examples pin down.
fn key(v: &Vec2) -> (BigInt, BigInt, BigInt, BigInt, BigInt) {
    (
        norm_inf(v),
        v.1.abs(),
        v.0.abs(),
        -v.0.clone(),
        -v.1.clone(),
    )
}

/// Nearest integer to p/q with halves rounded down; q > 0.
fn round_ratio(p: &BigInt, q: &BigInt) -> BigInt {
    let (d, r) = p.div_mod_floor(q);
    if &(BigInt::from(2) * r) > q {
        d + 1
    } else {
        d
    }
}

/// Lagrange-reduce in the euclidean norm: |b0| <= |b1| and the projection
/// coefficient of b1 on b0 lies in [-1/2, 1/2].
fn reduce_pair(mut b0: Vec2, mut b1: Vec2) -> (Vec2, Vec2) {
    loop {
        if norm_sq(&b1) < norm_sq(&b0) {
            std::mem::swap(&mut b0, &mut b1);
        }
        let m = round_ratio(&dot(&b0, &b1), &norm_sq(&b0));
        if m.is_zero() {
            return (b0, b1);
        }
        b1 = sub(&b1, &scaled(&b0, &m));
    }
}

/// Largest coefficient against a reduced basis vector of squared length
/// `nsq` that a lattice vector of max-norm <= t can carry.
fn coeff_box(t: &BigInt, nsq: &BigInt) -> i64 {
    let q = (BigInt::from(8) * t * t).div_floor(&(BigInt::from(3) * nsq));
    (q + 1i32)
        .sqrt()
        .try_into()
        .expect("coefficient box exceeds i64")
}

/// Basis whose first vector has minimal max-norm over the nonzero lattice
/// vectors and whose second has minimal max-norm over completions of the
/// first, both with deterministic tie-breaking.
pub fn minimal_basis(l: &Lattice2) -> Result<Basis2, LatticeError> {
    if l.det().is_zero() {
        return Err(LatticeError::Degenerate);
    }
    let (b0, b1) = reduce_pair(l.g0.clone(), l.g1.clone());
    let (n0, n1) = (norm_sq(&b0), norm_sq(&b1));

    // shortest vector: scan all coefficients reachable below the smaller
    // generator norm
    let t0 = norm_inf(&b0).min(norm_inf(&b1));
    let (ka, kc) = (coeff_box(&t0, &n0), coeff_box(&t0, &n1));
    let mut v0: Option<(Vec2, (i64, i64))> = None;
    for a in -ka..=ka {
        for c in -kc..=kc {
            if a == 0 && c == 0 {
                continue;
            }
            let v = sub(&scaled(&b0, &BigInt::from(a)), &neg(&scaled(&b1, &BigInt::from(c))));
            if v0.as_ref().map_or(true, |(best, _)| key(&v) < key(best)) {
                v0 = Some((v, (a, c)));
            }
        }
    }
    let (v0, (a0, c0)) = v0.expect("nonempty search box");

    // a completion from the extended gcd of v0's coefficients, shortened
    // against v0, bounds the completion search
    let eg = BigInt::from(a0).extended_gcd(&BigInt::from(c0));
    debug_assert!(eg.gcd.abs().is_one(), "minimal vector must be primitive");
    let (wa, wc) = (-eg.y.clone(), eg.x.clone());
    let mut w = sub(&scaled(&b0, &wa), &neg(&scaled(&b1, &wc)));
    let shift = round_ratio(&dot(&w, &v0), &norm_sq(&v0));
    w = sub(&w, &scaled(&v0, &shift));
    for s in [-1i64, 1] {
        let cand = sub(&w, &scaled(&v0, &BigInt::from(s)));
        if norm_inf(&cand) < norm_inf(&w) {
            w = cand;
        }
    }

    let t1 = norm_inf(&w);
    let (ka, kc) = (coeff_box(&t1, &n0), coeff_box(&t1, &n1));
    let mut v1: Option<Vec2> = None;
    for a in -ka..=ka {
        for c in -kc..=kc {
            // completes the basis exactly when the coefficient determinant
            // is a unit
            let unit = a0 * c - c0 * a;
            if unit != 1 && unit != -1 {
                continue;
            }
            let v = sub(&scaled(&b0, &BigInt::from(a)), &neg(&scaled(&b1, &BigInt::from(c))));
            if v1.as_ref().map_or(true, |best| key(&v) < key(best)) {
                v1 = Some(v);
            }
        }
    }
    let v1 = v1.expect("extended-gcd completion lies in the box");

    let basis = Basis2::new(v0, v1);
    debug_assert_eq!(basis.det().abs(), l.det().abs());
    Ok(basis)
}

fn is_mixed(v: &Vec2) -> bool {
    (v.0.is_positive() && v.1.is_negative()) || (v.0.is_negative() && v.1.is_positive())
}

/// Rewrite a minimal basis so all four entries are nonnegative, staying
/// within three times the input bound. Anchors on whichever vector does not
/// mix signs; a minimal basis always has one.
pub fn positivize(b: &Basis2) -> Result<Basis2, LatticeError> {
    if b.det().is_zero() {
        return Err(LatticeError::Degenerate);
    }
    let m_in = b.bound.clone();

    let (anchor, other, anchor_first) = if !is_mixed(&b.v0) {
        (b.v0.clone(), b.v1.clone(), true)
    } else if !is_mixed(&b.v1) {
        (b.v1.clone(), b.v0.clone(), false)
    } else {
        return Err(LatticeError::NotMinimal);
    };

    // normalize: anchor nonnegative with its larger entry first, other with
    // leading entry nonnegative
    let mut anchor = if anchor.0.is_negative() || anchor.1.is_negative() {
        neg(&anchor)
    } else {
        anchor
    };
    let mut other = other;
    let swapped = anchor.0 < anchor.1;
    if swapped {
        anchor = (anchor.1.clone(), anchor.0.clone());
        other = (other.1.clone(), other.0.clone());
    }
    if other.0.is_negative() || (other.0.is_zero() && other.1.is_negative()) {
        other = neg(&other);
    }

    if other.1.is_negative() {
        // n = ceil(r_other / r_anchor) lifts the second coordinate past zero
        // while the first stays inside [0, r_anchor)
        let n = other.0.div_ceil(&anchor.0);
        other = sub(&scaled(&anchor, &n), &other);
    }

    let (mut av, mut ov) = (anchor, other);
    if swapped {
        av = (av.1.clone(), av.0.clone());
        ov = (ov.1.clone(), ov.0.clone());
    }
    let (v0, v1) = if anchor_first { (av, ov) } else { (ov, av) };

    let out = Basis2::new(v0, v1);
    assert!(
        !out.v0.0.is_negative()
            && !out.v0.1.is_negative()
            && !out.v1.0.is_negative()
            && !out.v1.1.is_negative(),
        "positivization left a negative entry"
    );
    assert!(out.bound <= BigInt::from(3) * &m_in, "norm bound exceeded 3M");
    assert_eq!(out.det().abs(), b.det().abs(), "lattice changed");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: (i64, i64)) -> Vec2 {
        (BigInt::from(v.0), BigInt::from(v.1))
    }

    #[test]
    fn minimal_basis_frozen() {
        let b = minimal_basis(&Lattice2::from_integers((1, 0), (0, 1))).unwrap();
        assert_eq!(b, Basis2::from_integers((1, 0), (0, 1)));
        assert_eq!(b.bound, BigInt::from(1));

        let b = minimal_basis(&Lattice2::from_integers((2, 0), (0, 2))).unwrap();
        assert_eq!(b, Basis2::from_integers((2, 0), (0, 2)));
        assert_eq!(b.bound, BigInt::from(2));

        let b = minimal_basis(&Lattice2::from_integers((1, 1), (2, 0))).unwrap();
        assert_eq!(b, Basis2::from_integers((1, 1), (1, -1)));
        assert_eq!(b.bound, BigInt::from(1));
    }

    #[test]
    fn degenerate_rejected() {
        let l = Lattice2::from_integers((2, 4), (1, 2));
        assert_eq!(minimal_basis(&l).unwrap_err(), LatticeError::Degenerate);
    }

    #[test]
    fn positivize_frozen() {
        let p = positivize(&Basis2::from_integers((1, 0), (0, 1))).unwrap();
        assert_eq!(p, Basis2::from_integers((1, 0), (0, 1)));

        let p = positivize(&Basis2::from_integers((1, 1), (1, -1))).unwrap();
        assert_eq!(p, Basis2::from_integers((1, 1), (0, 2)));

        let p = positivize(&Basis2::from_integers((2, 1), (-1, 1))).unwrap();
        assert_eq!(p, Basis2::from_integers((2, 1), (1, 2)));
    }

    #[test]
    fn positivize_anchors_on_second_vector() {
        let p = positivize(&Basis2::from_integers((1, -1), (1, 1))).unwrap();
        assert_eq!(p.det().abs(), BigInt::from(2));
        assert!(!p.v0.0.is_negative() && !p.v0.1.is_negative());
        assert!(!p.v1.0.is_negative() && !p.v1.1.is_negative());
    }

    #[test]
    fn doubly_mixed_rejected() {
        let b = Basis2::from_integers((1, -1), (2, -1));
        assert_eq!(positivize(&b).unwrap_err(), LatticeError::NotMinimal);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut state = 0x51afd63b1b2c9e4du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut done = 0;
        while done < 300 {
            let e = |n: &mut dyn FnMut() -> u64| (n() % 13) as i64 - 6;
            let l = Lattice2::from_integers((e(&mut next), e(&mut next)), (e(&mut next), e(&mut next)));
            if l.det().is_zero() {
                continue;
            }
            let got = minimal_basis(&l).unwrap();

            // oracle: scan every vector within the generator norm; the
            // second minimum of a planar lattice always completes a basis
            let g = norm_inf(&l.g0)
                .max(norm_inf(&l.g1))
                .try_into()
                .unwrap_or(0i64);
            let mut best0: Option<Vec2> = None;
            for x in -g..=g {
                for y in -g..=g {
                    if x == 0 && y == 0 {
                        continue;
                    }
                    let v = big((x, y));
                    if !l.contains(&v) {
                        continue;
                    }
                    if best0.as_ref().map_or(true, |b| key(&v) < key(b)) {
                        best0 = Some(v);
                    }
                }
            }
            let best0 = best0.unwrap();
            assert_eq!(got.v0, best0, "lattice {:?}", l);

            let target = l.det().abs();
            let mut best1: Option<Vec2> = None;
            for x in -g..=g {
                for y in -g..=g {
                    let v = big((x, y));
                    if det2(&best0, &v).abs() != target || !l.contains(&v) {
                        continue;
                    }
                    if best1.as_ref().map_or(true, |b| key(&v) < key(b)) {
                        best1 = Some(v);
                    }
                }
            }
            assert_eq!(got.v1, best1.unwrap(), "lattice {:?}", l);
            done += 1;
        }
    }

    #[test]
    fn positivization_properties() {
        let mut state = 0xd1310ba698dfb5acu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut done = 0;
        while done < 10_000 {
            let e = |n: &mut dyn FnMut() -> u64| (n() % 201) as i64 - 100;
            let l = Lattice2::from_integers((e(&mut next), e(&mut next)), (e(&mut next), e(&mut next)));
            if l.det().is_zero() {
                continue;
            }
            let b = minimal_basis(&l).unwrap();
            assert!(
                !(is_mixed(&b.v0) && is_mixed(&b.v1)),
                "doubly mixed minimal basis for {:?}",
                l
            );
            let p = positivize(&b).unwrap();
            for v in [&p.v0, &p.v1] {
                assert!(!v.0.is_negative() && !v.1.is_negative());
                assert!(l.contains(v));
            }
            assert_eq!(p.det().abs(), l.det().abs());
            assert!(p.bound <= BigInt::from(3) * &b.bound);
            done += 1;
        }
    }
}
