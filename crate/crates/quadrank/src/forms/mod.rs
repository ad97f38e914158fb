//! Polynomial and binary-form algebra: the square-certificate homogenization
//! that turns y² = f(t) pulled back along a fractional linear map into a
//! squarefree integer form, and the odd monic model of an even-degree
//! hyperelliptic equation with a rational Weierstrass point.

pub mod binary;
pub mod poly;

pub use binary::{BinaryForm, MobiusMap};
pub use poly::Polynomial;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::arith;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormsError {
    #[error("polynomial must be nonconstant")]
    Constant,
    #[error("polynomial must be squarefree")]
    NotSquarefree,
    #[error("fractional linear map must be invertible")]
    SingularMap,
    #[error("polynomial degree must be even")]
    OddDegree,
    #[error("supplied point is not a root")]
    NotARoot,
}

/// f(tau(X/Y)) = form(X,Y) * (scalar / denominator(X,Y))² as rational
/// functions. `form` has integer coefficients, even degree >= 2, is
/// squarefree, and its content is squarefree; `denominator` is a power of
/// the pulled-back line at infinity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquareSplit {
    pub form: BinaryForm,
    pub scalar: BigRational,
    pub denominator: BinaryForm,
}

impl SquareSplit {
    /// Right-hand side form(x,y) * (scalar / denominator(x,y))², None where
    /// the denominator vanishes.
    pub fn value(&self, x: &BigInt, y: &BigInt) -> Option<BigRational> {
        let den = self.denominator.evaluate(x, y);
        if den.is_zero() {
            return None;
        }
        let r = &self.scalar / BigRational::from(den);
        Some(BigRational::from(self.form.evaluate(x, y)) * &r * &r)
    }
}

/// Split f(tau(X/Y)) into a squarefree integer binary form times the square
/// of a rational function. The square part of the content moves into the
/// scalar; squarefree content stays in the form.
pub fn homogenize_split(f: &Polynomial, tau: &MobiusMap) -> Result<SquareSplit, FormsError> {
    if tau.det().is_zero() {
        return Err(FormsError::SingularMap);
    }
    let n = match f.degree() {
        None | Some(0) => return Err(FormsError::Constant),
        Some(n) => n,
    };
    if !f.is_squarefree() {
        return Err(FormsError::NotSquarefree);
    }

    // f = (p/q) * fhat with fhat primitive integer
    let (pq, fhat) = f.primitive_integer_parts();

    let p_form = BinaryForm::new(vec![tau.b.clone(), tau.a.clone()]);
    let q_form = BinaryForm::new(vec![tau.d.clone(), tau.c.clone()]);

    // g = sum fhat[i] P^i Q^(n-i), homogeneous of degree n
    let mut qpow = vec![BinaryForm::new(vec![BigInt::one()])];
    for i in 0..n {
        qpow.push(qpow[i].mul(&q_form));
    }
    let mut g = BinaryForm::new(vec![fhat[n].clone()]);
    for i in (0..n).rev() {
        g = g.mul(&p_form).add(&qpow[n - i].scale(&fhat[i]));
    }

    // pad with one Q to make the exponent even; f(tau) = (p/q) g Q^eps / Q^(n+eps)
    let eps = n % 2;
    if eps == 1 {
        g = g.mul(&q_form);
    }
    let half = (n + eps) / 2;

    let ct = g.content();
    assert!(!ct.is_zero(), "pullback form vanished");
    let ghat = g.primitive();

    // rho = p*ct/q > 0; split off its largest square as the certificate scalar
    let rho_num = pq.numer() * &ct * pq.denom();
    let core = arith::kfree_part(&rho_num, 2).expect("positive numerator");
    let c0 = core.t.to_biguint().expect("positive squarefree part");
    let scalar = BigRational::new(core.z.clone(), pq.denom().clone());

    let form = ghat.scale(&BigInt::from(c0));
    let denominator = q_form.pow(half);

    let split = SquareSplit {
        form,
        scalar,
        denominator,
    };

    // the form is squarefree: distinct linear factors of f stay distinct and
    // the infinity line enters with exponent at most one
    let dh = split.form.dehomogenize();
    let xdeg = dh.degree().expect("nonzero form");
    assert!(
        dh.degree() == Some(0) || dh.squarefree_part().degree() == Some(xdeg),
        "square part escaped the certificate"
    );
    assert!((n + eps) - xdeg <= 1, "repeated factor at infinity");
    let d_form = split.form.degree();
    assert!(d_form % 2 == 0 && d_form >= 2, "form degree must be even");

    // spot-check the identity on degree-many points off the poles
    let mut checked = 0usize;
    let mut k = 1i64;
    while checked <= n {
        let x = BigInt::from(k);
        let y = BigInt::one();
        k += 1;
        let t = match tau.apply(&BigRational::from(x.clone())) {
            Some(t) => t,
            None => continue,
        };
        let rhs = split.value(&x, &y).expect("pole already skipped");
        assert_eq!(f.eval(&t), rhs, "square-split certificate failed");
        checked += 1;
    }

    Ok(split)
}

/// Monic odd-degree integer model of y² = f(x) at the rational root r of f.
/// The substitution chain is x = r + 1/u, v = y u^(g+1), w = l u scaled by
/// l^(d-1) with l = f'(r), then w -> w/clear² scaled by clear^(2d); all the
/// scalings are squares, so values of h land in the same square class as
/// values of f.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OddModel {
    pub h: Polynomial,
    pub genus: usize,
    pub root: BigRational,
    pub ell: BigRational,
    pub clear: BigInt,
}

impl OddModel {
    /// h(clear² l u) == clear^(2d) l^(d-1) u^(2g+2) f(r + 1/u) for u != 0.
    pub fn check_chain(&self, f: &Polynomial, u: &BigRational) -> bool {
        if u.is_zero() {
            return false;
        }
        let d = 2 * self.genus + 1;
        let clear2 = BigRational::from(&self.clear * &self.clear);
        let w = &clear2 * &self.ell * u;
        let lhs = self.h.eval(&w);
        let scale = rat_pow(&clear2, d as i64) * rat_pow(&self.ell, d as i64 - 1);
        let x = &self.root + BigRational::one() / u;
        let rhs = scale * rat_pow(u, d as i64 + 1) * f.eval(&x);
        lhs == rhs
    }
}

/// Rewrite squarefree f of even degree 2g+2 with f(r) = 0 as a monic integer
/// polynomial h of degree 2g+1 defining the same hyperelliptic curve.
pub fn odd_model(f: &Polynomial, r: &BigRational) -> Result<OddModel, FormsError> {
    let d0 = match f.degree() {
        None | Some(0) => return Err(FormsError::Constant),
        Some(n) => n,
    };
    if d0 % 2 != 0 {
        return Err(FormsError::OddDegree);
    }
    if !f.is_squarefree() {
        return Err(FormsError::NotSquarefree);
    }
    if !f.eval(r).is_zero() {
        return Err(FormsError::NotARoot);
    }
    let genus = d0 / 2 - 1;
    let d = 2 * genus + 1;

    // u^d0 f(r + 1/u): shift to the root, then reverse; the top slot is
    // f(r) = 0 so the degree drops to d with leading coefficient f'(r)
    let ft = f.taylor_shift(r).reversed(d0);
    assert_eq!(ft.degree(), Some(d), "root must be simple");
    let ell = ft.leading().unwrap().clone();

    // h0(w) = l^(d-1) ft(w/l), monic of degree d
    let h0 = Polynomial::new(
        (0..=d)
            .map(|k| ft.coeff(k) * rat_pow(&ell, d as i64 - 1 - k as i64))
            .collect(),
    );
    debug_assert!(h0.is_monic());

    // clear denominators with w -> w/clear², scale by clear^(2d)
    let mut clear = BigInt::one();
    for k in 0..=d {
        clear = clear.lcm(h0.coeff(k).denom());
    }
    let clear2 = BigRational::from(&clear * &clear);
    let h = Polynomial::new(
        (0..=d)
            .map(|k| h0.coeff(k) * rat_pow(&clear2, d as i64 - k as i64))
            .collect(),
    );
    assert!(h.is_monic());
    assert!(
        h.integer_coeffs().is_some(),
        "denominator clearing incomplete"
    );
    assert!(h.is_squarefree());

    let model = OddModel {
        h,
        genus,
        root: r.clone(),
        ell,
        clear,
    };
    for k in [1i64, 2, 3, -1, -2] {
        let u = BigRational::from(BigInt::from(k));
        assert!(model.check_chain(f, &u), "odd model chain failed");
    }
    Ok(model)
}

fn rat_pow(x: &BigRational, e: i64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e.unsigned_abs() {
        acc *= x;
    }
    if e < 0 {
        acc = acc.recip();
    }
    acc
}
