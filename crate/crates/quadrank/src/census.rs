//! Counting harnesses: the k-free specialization counter S_k(x) over a
//! binary form, the field census N^±(m^r; X) driven through the full
//! specialize-then-verify pipeline, and log-log growth fitting against
//! power-law lower bounds.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::arith;
use crate::classgroup::{self, ClassGroupError, StructureCache};
use crate::forms::BinaryForm;
use crate::specialize::{
    self, CurveSpec, RecordStatus, Sign, SpecializationRecord, SpecializeError,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CensusError {
    #[error("form is a constant multiple of a power of a linear form")]
    PowerOfLinear,
    #[error("form must be squarefree")]
    NotSquarefree,
    #[error("bad census parameters: {0}")]
    BadParameters(&'static str),
    #[error("series checkpoints must increase in x with nondecreasing counts")]
    BadSeries,
    #[error(transparent)]
    ClassGroup(#[from] ClassGroupError),
    #[error(transparent)]
    Specialize(#[from] SpecializeError),
}

/// A counting function sampled at increasing x; counts never decrease.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusSeries {
    checkpoints: Vec<(u64, u64)>,
}

impl CensusSeries {
    pub fn new(checkpoints: Vec<(u64, u64)>) -> Result<Self, CensusError> {
        for w in checkpoints.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                return Err(CensusError::BadSeries);
            }
        }
        Ok(CensusSeries { checkpoints })
    }

    pub fn points(&self) -> &[(u64, u64)] {
        &self.checkpoints
    }

    pub fn final_count(&self) -> u64 {
        self.checkpoints.last().map_or(0, |&(_, c)| c)
    }
}

/// Checkpoints spaced by factors of ten: 10, 100, ..., then `limit` itself.
pub fn decade_checkpoints(limit: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = 10u64;
    while x < limit {
        out.push(x);
        match x.checked_mul(10) {
            Some(next) => x = next,
            None => break,
        }
    }
    out.push(limit);
    out
}

fn floor_nth_root(x: u64, n: u32) -> u64 {
    if n == 1 {
        return x;
    }
    let mut r = (x as f64).powf(1.0 / n as f64).round() as u64;
    while r > 0 && BigInt::from(r).pow(n) > BigInt::from(x) {
        r -= 1;
    }
    while BigInt::from(r + 1).pow(n) <= BigInt::from(x) {
        r += 1;
    }
    r
}

/// No repeated non-unit factor over Q: at most one factor of Y, and the
/// dehomogenization (which keeps any X factors) squarefree.
fn form_is_squarefree(form: &BinaryForm) -> bool {
    let top = form.coeffs.iter().rposition(|c| !c.is_zero());
    let y_mult = match top {
        Some(i) => form.degree() - i,
        None => return false,
    };
    y_mult <= 1 && form.dehomogenize().is_squarefree()
}

fn check_form(form: &BinaryForm) -> Result<(), CensusError> {
    if form.is_power_of_linear() {
        return Err(CensusError::PowerOfLinear);
    }
    if !form_is_squarefree(form) {
        return Err(CensusError::NotSquarefree);
    }
    Ok(())
}

/// First value ≥ 1 congruent to `residue` mod `modulus`.
fn first_in_class(residue: u64, modulus: u64) -> u64 {
    let r = residue % modulus;
    if r == 0 {
        modulus
    } else {
        r
    }
}

/// The number of distinct k-free integers t with |t| ≤ x that occur as the
/// k-free part of F(a, b) over the box 1 ≤ a, b ≤ x^{1/deg F} with
/// a ≡ a_res and b ≡ b_res (mod modulus). Exact, by exhausting the box.
pub fn s_k_count(
    form: &BinaryForm,
    x: u64,
    k: u32,
    modulus: u64,
    a_res: u64,
    b_res: u64,
) -> Result<u64, CensusError> {
    Ok(s_k_series_at(form, &[x], k, modulus, a_res, b_res, 1)?[0])
}

/// Sweep the columns a ∈ `a_values` over 1 ≤ b ≤ bound, b ≡ b_res (mod
/// modulus), recording for each core t the smallest box edge max(a, b)
/// that reaches it.
fn sweep_columns(
    form: &BinaryForm,
    a_values: &[u64],
    bound: u64,
    k: u32,
    modulus: u64,
    b_res: u64,
) -> HashMap<BigInt, u64> {
    let mut first_box: HashMap<BigInt, u64> = HashMap::new();
    for &a in a_values {
        let mut b = first_in_class(b_res, modulus);
        while b <= bound {
            let v = form.evaluate(&BigInt::from(a), &BigInt::from(b));
            if !v.is_zero() {
                let t = arith::kfree_part(&v, k).expect("nonzero value").t;
                let edge = a.max(b);
                first_box
                    .entry(t)
                    .and_modify(|e| *e = (*e).min(edge))
                    .or_insert(edge);
            }
            b += modulus;
        }
    }
    first_box
}

/// S_k at each of the given x checkpoints (increasing), sharing one sweep
/// of the largest box: a core t counts at checkpoint x when some
/// representation fits in the x-box and |t| ≤ x. With workers > 1 the
/// columns are sharded round-robin; per-core minima merge by min, so the
/// partition cannot change the result.
fn s_k_series_at(
    form: &BinaryForm,
    xs: &[u64],
    k: u32,
    modulus: u64,
    a_res: u64,
    b_res: u64,
    workers: usize,
) -> Result<Vec<u64>, CensusError> {
    check_form(form)?;
    if k < 2 {
        return Err(CensusError::BadParameters("k must be at least 2"));
    }
    if modulus == 0 {
        return Err(CensusError::BadParameters("residue modulus must be >= 1"));
    }
    if xs.is_empty() || xs[0] == 0 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CensusError::BadParameters("x checkpoints must be positive and increasing"));
    }
    if workers == 0 {
        return Err(CensusError::BadParameters("worker count must be >= 1"));
    }
    let r = form.degree() as u32;
    let x_max = *xs.last().unwrap();
    let bound = floor_nth_root(x_max, r);

    let mut a_values = Vec::new();
    let mut a = first_in_class(a_res, modulus);
    while a <= bound {
        a_values.push(a);
        a += modulus;
    }

    // smallest box edge max(a, b) that reaches each core
    let shards = workers.min(a_values.len()).max(1);
    let first_box: HashMap<BigInt, u64> = if shards == 1 {
        sweep_columns(form, &a_values, bound, k, modulus, b_res)
    } else {
        let columns: Vec<Vec<u64>> = (0..shards)
            .map(|w| a_values.iter().copied().skip(w).step_by(shards).collect())
            .collect();
        let maps = std::thread::scope(|scope| {
            let handles: Vec<_> = columns
                .iter()
                .map(|shard| scope.spawn(move || sweep_columns(form, shard, bound, k, modulus, b_res)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("census shard panicked"))
                .collect::<Vec<_>>()
        });
        let mut merged: HashMap<BigInt, u64> = HashMap::new();
        for map in maps {
            for (t, edge) in map {
                merged
                    .entry(t)
                    .and_modify(|e| *e = (*e).min(edge))
                    .or_insert(edge);
            }
        }
        merged
    };

    let counts = xs
        .iter()
        .map(|&x| {
            let edge = floor_nth_root(x, r);
            let cap = BigInt::from(x);
            first_box
                .iter()
                .filter(|(t, &e)| e <= edge && t.abs() <= cap)
                .count() as u64
        })
        .collect();
    Ok(counts)
}

/// S_k(x) sampled at decade checkpoints up to x_max, the grid sharded
/// across `workers` threads.
pub fn s_k_series(
    form: &BinaryForm,
    x_max: u64,
    k: u32,
    modulus: u64,
    a_res: u64,
    b_res: u64,
    workers: usize,
) -> Result<CensusSeries, CensusError> {
    let xs = decade_checkpoints(x_max);
    let counts = s_k_series_at(form, &xs, k, modulus, a_res, b_res, workers)?;
    CensusSeries::new(xs.into_iter().zip(counts).collect())
}

/// Outcome of a verified field census: the counting series, the verified
/// records, and the confirm/refute tallies behind it.
#[derive(Debug, Clone)]
pub struct FieldCensus {
    pub series: CensusSeries,
    pub records: Vec<SpecializationRecord>,
    pub confirmed: u64,
    pub refuted: u64,
    pub duplicates: u64,
}

impl FieldCensus {
    /// Fraction of verified fields that missed the predicted rank.
    pub fn refuted_fraction(&self) -> f64 {
        let total = self.confirmed + self.refuted;
        if total == 0 {
            0.0
        } else {
            self.refuted as f64 / total as f64
        }
    }
}

/// Count distinct fields with |d| ≤ X and verified m-rank ≥ rank_target,
/// produced by enumerate_specializations at the given height bound. Each
/// record with |d_field| ≤ X is verified through the class-group pipeline
/// (ordinary group for imaginary fields, narrow group for real ones);
/// records beyond X stay pending. The series counts verified fields at
/// decade checkpoints of |d|, so it is a lower bound for the true census.
#[allow(clippy::too_many_arguments)]
pub fn field_census(
    curve: &CurveSpec,
    s_primes: &[u64],
    sign: Sign,
    disc_bound: u64,
    m: u64,
    rank_target: u32,
    height_bound: u64,
    cache: &StructureCache,
) -> Result<FieldCensus, CensusError> {
    if disc_bound == 0 {
        return Err(CensusError::BadParameters("discriminant bound must be >= 1"));
    }
    let enumeration = specialize::enumerate_specializations(curve, s_primes, sign, height_bound)?;
    let mut records = enumeration.records;
    let cap = BigInt::from(disc_bound);
    let mut confirmed = 0u64;
    let mut refuted = 0u64;
    let mut verified_discs: Vec<u64> = Vec::new();
    for rec in &mut records {
        if rec.d_field.abs() > cap {
            continue;
        }
        let structure = classgroup::group_structure_cached(cache, &rec.d_field)?;
        let rank = classgroup::m_rank(&structure, m)?;
        rec.verified_rank = Some(rank);
        if rank >= rank_target {
            rec.status = RecordStatus::Verified;
            confirmed += 1;
            verified_discs.push(rec.d_field.abs().try_into().expect("within disc bound"));
        } else {
            rec.status = RecordStatus::Refuted;
            refuted += 1;
        }
    }
    verified_discs.sort_unstable();
    let checkpoints = decade_checkpoints(disc_bound)
        .into_iter()
        .map(|x| {
            let n = verified_discs.partition_point(|&d| d <= x) as u64;
            (x, n)
        })
        .collect();
    Ok(FieldCensus {
        series: CensusSeries::new(checkpoints)?,
        records,
        confirmed,
        refuted,
        duplicates: enumeration.duplicates,
    })
}

/// Least-squares fit of the series against c·x^exponent/(log x)^log_power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    /// Slope of log(count) against log(x).
    pub slope: f64,
    /// Minimal c with count ≥ c·x^exponent/(log x)^log_power everywhere.
    pub constant: f64,
    /// Checkpoints with positive count that entered the fit.
    pub points: usize,
    /// Whether at least four positive checkpoints were available.
    pub sufficient: bool,
}

pub fn growth_fit(series: &CensusSeries, exponent: f64, log_power: i32) -> GrowthFit {
    let pts: Vec<(f64, f64)> = series
        .points()
        .iter()
        .filter(|&&(x, c)| x >= 2 && c > 0)
        .map(|&(x, c)| ((x as f64).ln(), (c as f64).ln()))
        .collect();
    let points = pts.len();
    let sufficient = points >= 4;
    if points == 0 {
        return GrowthFit { slope: 0.0, constant: 0.0, points, sufficient };
    }
    let n = points as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let constant = pts
        .iter()
        .map(|&(lx, lc)| {
            // count / (x^e / (log x)^p) in log space
            (lc - exponent * lx + log_power as f64 * lx.ln()).exp()
        })
        .fold(f64::INFINITY, f64::min);
    GrowthFit { slope, constant, points, sufficient }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialize::catalog_curve;

    fn form(coeffs: &[i64]) -> BinaryForm {
        BinaryForm::from_integers(coeffs)
    }

    #[test]
    fn s_k_frozen_desk_checks() {
        // X³Y + Y⁴ over the box a,b ≤ 16^{1/4} = 2: values {2, 18, 9, 32},
        // cores {2, 2, 1, 2}
        let f = form(&[1, 0, 0, 1, 0]);
        assert_eq!(s_k_count(&f, 16, 2, 1, 0, 0).unwrap(), 2);
        assert_eq!(s_k_count(&f, 1, 2, 1, 0, 0).unwrap(), 0);
        let xy = form(&[0, 1, 0]);
        assert_eq!(s_k_count(&xy, 4, 2, 1, 0, 0).unwrap(), 2);
    }

    #[test]
    fn s_k_rejects_degenerate_forms() {
        // (X + Y)²
        assert_eq!(
            s_k_count(&form(&[1, 2, 1]), 16, 2, 1, 0, 0),
            Err(CensusError::PowerOfLinear)
        );
        // X alone
        assert_eq!(
            s_k_count(&form(&[0, 1]), 16, 2, 1, 0, 0),
            Err(CensusError::PowerOfLinear)
        );
        // X²(X + Y)
        assert_eq!(
            s_k_count(&form(&[0, 0, 1, 1]), 16, 2, 1, 0, 0),
            Err(CensusError::NotSquarefree)
        );
        assert_eq!(
            s_k_count(&form(&[1, 0, 0, 1, 0]), 16, 1, 1, 0, 0),
            Err(CensusError::BadParameters("k must be at least 2"))
        );
    }

    #[test]
    fn s_k_square_scaling_invariance() {
        let f = form(&[1, 0, 0, 1, 0]);
        let g = form(&[4, 0, 0, 4, 0]);
        let a = s_k_series(&f, 10_000, 2, 1, 0, 0, 1).unwrap();
        let b = s_k_series(&g, 10_000, 2, 1, 0, 0, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn s_k_residue_restriction_is_a_subset() {
        let f = form(&[1, 0, 0, 1, 0]);
        let full = s_k_series(&f, 100_000, 2, 1, 0, 0, 1).unwrap();
        let restricted = s_k_series(&f, 100_000, 2, 3, 1, 2, 1).unwrap();
        for (&(x1, c1), &(x2, c2)) in full.points().iter().zip(restricted.points()) {
            assert_eq!(x1, x2);
            assert!(c1 >= c2);
        }
    }

    #[test]
    fn s_k_sharded_sweep_matches_sequential() {
        let f = form(&[1, 0, 0, 1, 0]);
        let seq = s_k_series(&f, 100_000, 2, 1, 0, 0, 1).unwrap();
        for workers in [2, 3, 7, 64] {
            assert_eq!(s_k_series(&f, 100_000, 2, 1, 0, 0, workers).unwrap(), seq);
        }
        let xy = form(&[0, 1, 0]);
        let seq = s_k_series(&xy, 10_000, 2, 3, 1, 2, 1).unwrap();
        assert_eq!(s_k_series(&xy, 10_000, 2, 3, 1, 2, 5).unwrap(), seq);
        assert!(matches!(
            s_k_series(&xy, 10_000, 2, 1, 0, 0, 0),
            Err(CensusError::BadParameters(_))
        ));
    }

    #[test]
    fn series_constructor_rejects_bad_shapes() {
        assert!(CensusSeries::new(vec![(10, 1), (10, 2)]).is_err());
        assert!(CensusSeries::new(vec![(10, 3), (100, 2)]).is_err());
        assert!(CensusSeries::new(vec![(10, 0), (100, 4)]).is_ok());
    }

    #[test]
    fn growth_fit_recovers_power_laws() {
        let pts: Vec<(u64, u64)> = [10u64, 100, 1000, 10_000]
            .iter()
            .map(|&x| (x, x * x))
            .collect();
        let fit = growth_fit(&CensusSeries::new(pts).unwrap(), 2.0, 0);
        assert!(fit.sufficient);
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!((fit.constant - 1.0).abs() < 1e-9);

        // x²/(log x)² drags the effective exponent below 2 on this range;
        // the exact least-squares value over the four decades is frozen
        let pts: Vec<(u64, u64)> = [100u64, 1000, 10_000, 100_000]
            .iter()
            .map(|&x| {
                let l = (x as f64).ln();
                (x, ((x * x) as f64 / (l * l)) as u64)
            })
            .collect();
        let fit = growth_fit(&CensusSeries::new(pts).unwrap(), 2.0, 2);
        assert!((fit.slope - 1.7363963317503233).abs() < 1e-9);
        assert!(fit.slope < 2.0);
        assert!(fit.constant > 0.0);
    }

    #[test]
    fn growth_fit_reports_insufficient_data() {
        let fit = growth_fit(&CensusSeries::new(vec![(10, 0), (100, 5)]).unwrap(), 1.0, 0);
        assert_eq!(fit.points, 1);
        assert!(!fit.sufficient);
        let fit = growth_fit(&CensusSeries::new(vec![(10, 0)]).unwrap(), 1.0, 0);
        assert_eq!(fit.points, 0);
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn s_k_series_matches_pointwise_counts() {
        let f = form(&[1, 0, 0, 1, 0]);
        let series = s_k_series(&f, 100_000, 2, 1, 0, 0, 1).unwrap();
        for &(x, c) in series.points() {
            assert_eq!(s_k_count(&f, x, 2, 1, 0, 0).unwrap(), c);
        }
        let fit = growth_fit(&series, 0.5, 2);
        assert!(fit.constant > 0.0);
        assert!(fit.slope > 0.3);
    }

    #[test]
    fn field_census_m2_pipeline() {
        let curve = catalog_curve("family", &[2, 2]).unwrap();
        let cache = StructureCache::new();
        let census = field_census(
            &curve,
            &[2, 3],
            Sign::Negative,
            1_000_000,
            2,
            2,
            31,
            &cache,
        )
        .unwrap();
        assert!(census.series.final_count() >= 1);
        assert_eq!(census.refuted, 0);
        // independent genus-theory check on every counted field
        let mut seen = std::collections::HashSet::new();
        for rec in &census.records {
            assert!(seen.insert(rec.t.clone()));
            if rec.status == RecordStatus::Verified {
                let omega = arith::factor(&rec.d_field).unwrap().omega();
                assert!(omega as u32 - 1 >= 2);
            }
        }
        // monotone series
        for w in census.series.points().windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        // the first record is the base specialization
        assert_eq!(census.records[0].t, BigInt::from(-140910));
        assert_eq!(census.records[0].verified_rank, Some(5));
    }

    #[test]
    fn field_census_all_zero_when_bound_tiny() {
        let curve = catalog_curve("family", &[2, 2]).unwrap();
        let cache = StructureCache::new();
        let census =
            field_census(&curve, &[2, 3], Sign::Negative, 10, 2, 2, 5, &cache).unwrap();
        assert_eq!(census.series.final_count(), 0);
        assert_eq!(census.confirmed + census.refuted, 0);
        assert!(census.records.iter().all(|r| r.status == RecordStatus::Pending));
    }
}
